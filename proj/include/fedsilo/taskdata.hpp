#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedsilo/errors.hpp"

namespace fedsilo {

enum class DatasetKind { BoolQ, CB, COPA, MultiRC, RTE, WiC, WSC };

DatasetKind dataset_kind_from(std::string_view name);
const char* dataset_kind_name(DatasetKind kind);

struct Prompt {
    std::string instruction;
    std::string input; // empty for datasets whose template has no input
};

// Substitutes sample fields into the dataset's Alpaca instruction/input
// patterns. Throws MissingField when the sample lacks a placeholder field.
Prompt format_prompt(DatasetKind kind, const std::map<std::string, std::string>& sample);

// Wraps a formatted prompt into the Alpaca instruction/input/response scaffold.
std::string render_alpaca(const Prompt& prompt);

const std::vector<std::string>& answer_vocabulary(DatasetKind kind);

// Per-dataset training knobs; batches_per_round == nullopt means the whole
// local shard every round.
struct DatasetProfile {
    DatasetKind kind;
    std::optional<int> batches_per_round;
    int max_token_length;
};

DatasetProfile profile_for(DatasetKind kind);

// Whitespace-token truncation keeping the prefix; tokens are rejoined with
// single spaces.
std::string truncate_tokens(const std::string& text, std::size_t max_tokens);

// Labeled numeric dataset: the desk-scale stand-in for a text corpus.
struct Dataset {
    std::size_t feature_dim = 0;
    std::size_t class_count = 0;
    std::vector<std::vector<double>> features;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

// Borrowed subset of a dataset.
struct DatasetView {
    const Dataset* data = nullptr;
    std::vector<std::size_t> indices;

    std::size_t size() const { return indices.size(); }
    const std::vector<double>& x(std::size_t i) const { return data->features[indices[i]]; }
    int y(std::size_t i) const { return data->labels[indices[i]]; }

    static DatasetView whole(const Dataset& d);
};

// Gaussian blobs with class centers on a circle in the first two feature
// dimensions; exact balanced class counts, sample order shuffled by seed.
Dataset synth_blobs(std::size_t classes, std::size_t dim, std::size_t n, double spread,
                    double radius, std::uint64_t seed);

struct LoaderSpec {
    std::string scheme; // "synthetic" | "csv" | "json"
    std::string body;   // generator name or file path
    std::map<std::string, std::string> params;

    bool has_partition() const { return params.count("clients") > 0; }
};

LoaderSpec parse_loader_spec(const std::string& spec);

// Loads a dataset from a loader spec, applying the dual-Dirichlet shard
// selection when partition parameters (clients/alpha1/alpha2/pseed/client)
// are present. Example: synthetic:blobs?classes=10&n=2000&seed=7
Dataset load_dataset(const std::string& spec);

} // namespace fedsilo
