#include "fedsilo/taskdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "fedsilo/partition.hpp"
#include "fedsilo/rng.hpp"

namespace fedsilo {

namespace {

const std::string& field(const std::map<std::string, std::string>& sample, const char* name,
                         DatasetKind kind) {
    auto it = sample.find(name);
    if (it == sample.end())
        fail(Err::MissingField, std::string(dataset_kind_name(kind)) + " sample lacks field '" +
                                    name + "'");
    return it->second;
}

} // namespace

DatasetKind dataset_kind_from(std::string_view name) {
    if (name == "BoolQ") return DatasetKind::BoolQ;
    if (name == "CB") return DatasetKind::CB;
    if (name == "COPA") return DatasetKind::COPA;
    if (name == "MultiRC") return DatasetKind::MultiRC;
    if (name == "RTE") return DatasetKind::RTE;
    if (name == "WiC") return DatasetKind::WiC;
    if (name == "WSC") return DatasetKind::WSC;
    fail(Err::UnknownDatasetKind, "'" + std::string(name) + "'");
}

const char* dataset_kind_name(DatasetKind kind) {
    switch (kind) {
    case DatasetKind::BoolQ: return "BoolQ";
    case DatasetKind::CB: return "CB";
    case DatasetKind::COPA: return "COPA";
    case DatasetKind::MultiRC: return "MultiRC";
    case DatasetKind::RTE: return "RTE";
    case DatasetKind::WiC: return "WiC";
    case DatasetKind::WSC: return "WSC";
    }
    return "?";
}

Prompt format_prompt(DatasetKind kind, const std::map<std::string, std::string>& sample) {
    Prompt p;
    switch (kind) {
    case DatasetKind::BoolQ:
        p.instruction =
            "The following reading comprehension question requires you to understand the "
            "following passage and answer a question related to the passage. Please answer "
            "with only \"True\" or \"False\" to the question: " +
            field(sample, "question", kind) + "?";
        p.input = field(sample, "passage", kind);
        break;
    case DatasetKind::CB:
        p.instruction = "Please determine whether the hypothesis \"" +
                        field(sample, "hypothesis", kind) +
                        "\" entails, contradicts, or is unrelated to the following premise: \"" +
                        field(sample, "premise", kind) +
                        "\". Please respond with either \"Entailment\", \"Contradiction\", or "
                        "\"Neutral\".";
        break;
    case DatasetKind::COPA:
        p.instruction = "Given the following premise, please determine whether Choice One, " +
                        field(sample, "choice1", kind) + ", or Choice Two, " +
                        field(sample, "choice2", kind) + ", is the " +
                        field(sample, "question", kind) +
                        " of the premise. Please respond with either \"One\" or \"Two\".";
        p.input = field(sample, "premise", kind);
        break;
    case DatasetKind::MultiRC:
        p.instruction = "Given the following paragraph, please determine whether \"" +
                        field(sample, "answer", kind) +
                        "\" is a correct answer to the question \"" +
                        field(sample, "question", kind) +
                        "\". Please respond with either \"Yes\" or \"No\".";
        p.input = field(sample, "paragraph", kind);
        break;
    case DatasetKind::RTE:
        p.instruction = "Please determine whether the sentence \"" +
                        field(sample, "premise", kind) + "\" entails the hypothesis \"" +
                        field(sample, "hypothesis", kind) +
                        "\" or not. Please respond with either \"Yes\" or \"No\".";
        break;
    case DatasetKind::WiC:
        p.instruction = "Please determine whether the word \"" + field(sample, "word", kind) +
                        "\" is used in the same way in the following two sentences: \"" +
                        field(sample, "sentence1", kind) + "\" and \"" +
                        field(sample, "sentence2", kind) +
                        "\" Please respond with either \"Yes\" or \"No\".";
        break;
    case DatasetKind::WSC:
        p.instruction =
            "Please carefully read the following passages. For each passage, you must "
            "identify whether the pronoun marked in *bold* refers to the \"quoted\" noun.";
        p.input = field(sample, "text", kind) +
                  ". \n Question: In the passage above, does the pronoun " +
                  field(sample, "span2_text", kind) + " refer to " +
                  field(sample, "span1_text", kind);
        break;
    }
    return p;
}

std::string render_alpaca(const Prompt& prompt) {
    if (prompt.input.empty()) {
        return "Below is an instruction that describes a task. Write a response that "
               "appropriately completes the request.\n\n### Instruction:\n" +
               prompt.instruction + "\n\n### Response:\n";
    }
    return "Below is an instruction that describes a task, paired with an input that provides "
           "further context. Write a response that appropriately completes the request.\n\n### "
           "Instruction:\n" +
           prompt.instruction + "\n\n### Input:\n" + prompt.input + "\n\n### Response:\n";
}

const std::vector<std::string>& answer_vocabulary(DatasetKind kind) {
    static const std::vector<std::string> bool_vocab = {"True", "False"};
    static const std::vector<std::string> cb_vocab = {"Entailment", "Contradiction", "Neutral"};
    static const std::vector<std::string> copa_vocab = {"One", "Two"};
    static const std::vector<std::string> yes_no = {"Yes", "No"};
    switch (kind) {
    case DatasetKind::BoolQ: return bool_vocab;
    case DatasetKind::CB: return cb_vocab;
    case DatasetKind::COPA: return copa_vocab;
    default: return yes_no;
    }
}

DatasetProfile profile_for(DatasetKind kind) {
    switch (kind) {
    case DatasetKind::BoolQ: return {kind, 200, 350};
    case DatasetKind::CB: return {kind, std::nullopt, 350};
    case DatasetKind::COPA: return {kind, std::nullopt, 300};
    case DatasetKind::MultiRC: return {kind, 200, 600};
    case DatasetKind::RTE: return {kind, 200, 200};
    case DatasetKind::WiC: return {kind, 200, 200};
    case DatasetKind::WSC: return {kind, std::nullopt, 220};
    }
    fail(Err::UnknownDatasetKind, "invalid kind value");
}

std::string truncate_tokens(const std::string& text, std::size_t max_tokens) {
    std::istringstream in(text);
    std::string token, out;
    std::size_t kept = 0;
    while (kept < max_tokens && in >> token) {
        if (kept > 0) out += ' ';
        out += token;
        ++kept;
    }
    return out;
}

DatasetView DatasetView::whole(const Dataset& d) {
    DatasetView v;
    v.data = &d;
    v.indices.resize(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) v.indices[i] = i;
    return v;
}

Dataset synth_blobs(std::size_t classes, std::size_t dim, std::size_t n, double spread,
                    double radius, std::uint64_t seed) {
    if (classes < 1) fail(Err::BadGeneratorParams, "blobs: classes must be >= 1");
    if (dim < 2) fail(Err::BadGeneratorParams, "blobs: dim must be >= 2");
    if (n == 0) fail(Err::BadGeneratorParams, "blobs: n must be >= 1");
    if (spread < 0.0) fail(Err::BadGeneratorParams, "blobs: spread must be >= 0");

    // class centers on a circle in the first two dimensions; the remaining
    // dimensions carry pure noise
    std::vector<std::vector<double>> centers(classes, std::vector<double>(dim, 0.0));
    for (std::size_t k = 0; k < classes; ++k) {
        const double theta = 2.0 * M_PI * double(k) / double(classes);
        centers[k][0] = radius * std::cos(theta);
        centers[k][1] = radius * std::sin(theta);
    }

    // exact balanced counts, remainder spread over the lowest classes
    std::vector<int> labels;
    labels.reserve(n);
    for (std::size_t k = 0; k < classes; ++k) {
        const std::size_t count = n / classes + (k < n % classes ? 1 : 0);
        labels.insert(labels.end(), count, static_cast<int>(k));
    }

    Rng rng(seed);
    rng.shuffle(labels);

    Dataset d;
    d.feature_dim = dim;
    d.class_count = classes;
    d.labels = std::move(labels);
    d.features.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(dim);
        for (std::size_t j = 0; j < dim; ++j)
            x[j] = centers[d.labels[i]][j] + spread * rng.normal();
        d.features.push_back(std::move(x));
    }
    return d;
}

LoaderSpec parse_loader_spec(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos)
        fail(Err::BadGeneratorParams, "loader spec missing scheme: '" + spec + "'");
    LoaderSpec out;
    out.scheme = spec.substr(0, colon);
    std::string rest = spec.substr(colon + 1);
    const auto qmark = rest.find('?');
    if (qmark != std::string::npos) {
        std::string query = rest.substr(qmark + 1);
        rest = rest.substr(0, qmark);
        std::size_t pos = 0;
        while (pos < query.size()) {
            auto amp = query.find('&', pos);
            if (amp == std::string::npos) amp = query.size();
            const std::string kv = query.substr(pos, amp - pos);
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0)
                fail(Err::BadGeneratorParams, "malformed loader param '" + kv + "'");
            out.params[kv.substr(0, eq)] = kv.substr(eq + 1);
            pos = amp + 1;
        }
    }
    out.body = rest;
    if (out.scheme != "synthetic" && out.scheme != "csv" && out.scheme != "json")
        fail(Err::BadGeneratorParams, "unknown loader scheme '" + out.scheme + "'");
    return out;
}

namespace {

std::uint64_t param_u64(const LoaderSpec& s, const std::string& key, std::uint64_t fallback,
                        bool required = false) {
    auto it = s.params.find(key);
    if (it == s.params.end()) {
        if (required) fail(Err::BadGeneratorParams, "loader spec missing param '" + key + "'");
        return fallback;
    }
    try {
        return std::stoull(it->second);
    } catch (const std::exception&) {
        fail(Err::BadGeneratorParams, "param '" + key + "' is not an integer");
    }
}

double param_f64(const LoaderSpec& s, const std::string& key, double fallback) {
    auto it = s.params.find(key);
    if (it == s.params.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        fail(Err::BadGeneratorParams, "param '" + key + "' is not a number");
    }
}

Dataset load_csv(const std::string& path, const std::string& label_col) {
    std::ifstream in(path);
    if (!in) fail(Err::SourceUnreadable, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) fail(Err::SchemaMismatch, "empty CSV '" + path + "'");

    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream row(s);
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (!s.empty() && s.back() == ',') cells.push_back("");
        return cells;
    };

    const auto header = split(line);
    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_col) label_idx = i;
    if (label_idx == header.size())
        fail(Err::SchemaMismatch, "CSV '" + path + "' has no '" + label_col + "' column");

    Dataset d;
    d.feature_dim = header.size() - 1;
    int max_label = -1;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size())
            fail(Err::SchemaMismatch,
                 "CSV '" + path + "' line " + std::to_string(lineno) + " has wrong cell count");
        std::vector<double> x;
        x.reserve(d.feature_dim);
        int label = 0;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            try {
                if (i == label_idx) {
                    label = std::stoi(cells[i]);
                } else {
                    x.push_back(std::stod(cells[i]));
                }
            } catch (const std::exception&) {
                fail(Err::SchemaMismatch, "CSV '" + path + "' line " + std::to_string(lineno) +
                                              ": non-numeric cell '" + cells[i] + "'");
            }
        }
        if (label < 0)
            fail(Err::SchemaMismatch, "CSV '" + path + "': negative label");
        max_label = std::max(max_label, label);
        d.features.push_back(std::move(x));
        d.labels.push_back(label);
    }
    if (d.labels.empty()) fail(Err::SchemaMismatch, "CSV '" + path + "' has no data rows");
    d.class_count = static_cast<std::size_t>(max_label) + 1;
    return d;
}

Dataset load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Err::SourceUnreadable, "cannot open '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(Err::SchemaMismatch, "JSON '" + path + "': " + e.what());
    }
    const nlohmann::json* samples = &doc;
    if (doc.is_object()) {
        if (!doc.contains("samples"))
            fail(Err::SchemaMismatch, "JSON '" + path + "' lacks 'samples'");
        samples = &doc["samples"];
    }
    if (!samples->is_array() || samples->empty())
        fail(Err::SchemaMismatch, "JSON '" + path + "': samples must be a nonempty array");

    Dataset d;
    int max_label = -1;
    for (const auto& s : *samples) {
        if (!s.is_object() || !s.contains("x") || !s.contains("y") || !s["x"].is_array())
            fail(Err::SchemaMismatch, "JSON '" + path + "': sample must be {x: [...], y: int}");
        std::vector<double> x;
        for (const auto& v : s["x"]) {
            if (!v.is_number()) fail(Err::SchemaMismatch, "JSON '" + path + "': non-numeric x");
            x.push_back(v.get<double>());
        }
        const int y = s["y"].get<int>();
        if (y < 0) fail(Err::SchemaMismatch, "JSON '" + path + "': negative label");
        if (d.features.empty()) {
            d.feature_dim = x.size();
        } else if (x.size() != d.feature_dim) {
            fail(Err::SchemaMismatch, "JSON '" + path + "': inconsistent feature dim");
        }
        max_label = std::max(max_label, y);
        d.features.push_back(std::move(x));
        d.labels.push_back(y);
    }
    d.class_count = static_cast<std::size_t>(max_label) + 1;
    return d;
}

} // namespace

Dataset load_dataset(const std::string& spec_str) {
    const LoaderSpec spec = parse_loader_spec(spec_str);

    Dataset full;
    if (spec.scheme == "synthetic") {
        if (spec.body != "blobs")
            fail(Err::BadGeneratorParams, "unknown generator '" + spec.body + "'");
        full = synth_blobs(param_u64(spec, "classes", 0, true), param_u64(spec, "dim", 8),
                           param_u64(spec, "n", 0, true), param_f64(spec, "spread", 1.0),
                           param_f64(spec, "radius", 4.0), param_u64(spec, "seed", 0, true));
    } else if (spec.scheme == "csv") {
        std::string label_col = "label";
        if (auto it = spec.params.find("label"); it != spec.params.end()) label_col = it->second;
        full = load_csv(spec.body, label_col);
    } else {
        full = load_json_file(spec.body);
    }

    if (!spec.has_partition()) return full;

    PartitionConfig pc;
    pc.n_clients = param_u64(spec, "clients", 0, true);
    pc.alpha1 = param_f64(spec, "alpha1", 0.0);
    pc.alpha2 = param_f64(spec, "alpha2", 0.0);
    pc.seed = param_u64(spec, "pseed", 0, true);
    const std::uint64_t client = param_u64(spec, "client", 0, true);
    if (client >= pc.n_clients)
        fail(Err::BadGeneratorParams, "client index out of range in loader spec");

    const PartitionPlan plan = dual_dirichlet_partition(full.labels, pc);
    const auto& shard_idx = plan.assignments[client];
    Dataset shard;
    shard.feature_dim = full.feature_dim;
    shard.class_count = full.class_count;
    shard.features.reserve(shard_idx.size());
    shard.labels.reserve(shard_idx.size());
    for (std::size_t i : shard_idx) {
        shard.features.push_back(full.features[i]);
        shard.labels.push_back(full.labels[i]);
    }
    return shard;
}

} // namespace fedsilo
