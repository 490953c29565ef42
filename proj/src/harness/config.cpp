#include "btda/harness/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "btda/errors.hpp"
#include "btda/rng.hpp"

namespace btda::harness {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const std::uint64_t i = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<Index> parse_index_list(const std::string& key, const std::string& v) {
    std::vector<Index> out;
    for (const auto& item : split_csv(v)) {
        out.push_back(static_cast<Index>(parse_int(key, item)));
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

std::string join_indices(const std::vector<Index>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(xs[i]);
    }
    return out;
}

void apply_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
    if (key == "dataset") {
        if (value == "blobs") c.dataset = DatasetKind::Blobs;
        else if (value == "idx") c.dataset = DatasetKind::IdxFile;
        else throw ConfigError("dataset: expected blobs|idx, got '" + value + "'");
    } else if (key == "blobs.classes") {
        c.blobs.classes = static_cast<Index>(parse_int(key, value));
    } else if (key == "blobs.dim") {
        c.blobs.dim = static_cast<Index>(parse_int(key, value));
    } else if (key == "blobs.train_per_class") {
        c.blobs.train_per_class = parse_index_list(key, value);
    } else if (key == "blobs.test_per_class") {
        c.blobs.test_per_class = parse_index_list(key, value);
    } else if (key == "blobs.separation") {
        c.blobs.separation = parse_double(key, value);
    } else if (key == "blobs.sigma") {
        c.blobs.sigma = parse_double(key, value);
    } else if (key == "blobs.data_seed") {
        c.blobs.data_seed = parse_u64(key, value);
    } else if (key == "idx.image_path") {
        c.idx.image_path = value;
    } else if (key == "idx.label_path") {
        c.idx.label_path = value;
    } else if (key == "idx.per_class_train") {
        c.idx.per_class_train = static_cast<Index>(parse_int(key, value));
    } else if (key == "idx.per_class_test") {
        c.idx.per_class_test = static_cast<Index>(parse_int(key, value));
    } else if (key == "idx.downscale") {
        c.idx.downscale = static_cast<Index>(parse_int(key, value));
    } else if (key == "idx.keep_classes") {
        c.idx.keep_classes.clear();
        for (const auto& item : split_csv(value)) {
            c.idx.keep_classes.push_back(static_cast<int>(parse_int(key, item)));
        }
    } else if (key == "idx.max_label") {
        c.idx.max_label = static_cast<int>(parse_int(key, value));
    } else if (key == "idx.data_seed") {
        c.idx.data_seed = parse_u64(key, value);
    } else if (key == "model.kind") {
        if (value == "logreg") c.model_kind = ModelKind::LogisticRegression;
        else if (value == "mlp") c.model_kind = ModelKind::Mlp;
        else throw ConfigError("model.kind: expected logreg|mlp, got '" + value + "'");
    } else if (key == "model.hidden_dim") {
        c.hidden_dim = static_cast<Index>(parse_int(key, value));
    } else if (key == "train.optimizer") {
        if (value == "sgd") c.training.optimizer = Optimizer::Sgd;
        else if (value == "adam") c.training.optimizer = Optimizer::Adam;
        else throw ConfigError("train.optimizer: expected sgd|adam, got '" + value + "'");
    } else if (key == "train.learning_rate") {
        c.training.learning_rate = parse_double(key, value);
    } else if (key == "train.weight_decay") {
        c.training.weight_decay = parse_double(key, value);
    } else if (key == "train.batch_size") {
        c.training.batch_size = static_cast<Index>(parse_int(key, value));
    } else if (key == "train.epochs") {
        c.training.epochs = static_cast<Index>(parse_int(key, value));
    } else if (key == "train.swa_window") {
        c.training.swa_window = static_cast<Index>(parse_int(key, value));
    } else if (key == "train.adam_beta1") {
        c.training.adam_beta1 = parse_double(key, value);
    } else if (key == "train.adam_beta2") {
        c.training.adam_beta2 = parse_double(key, value);
    } else if (key == "train.adam_eps") {
        c.training.adam_eps = parse_double(key, value);
    } else if (key == "regime.kind") {
        if (value == "de_init") c.regime.kind = RegimeKind::DeInit;
        else if (value == "de_batch") c.regime.kind = RegimeKind::DeBatch;
        else throw ConfigError("regime.kind: expected de_init|de_batch, got '" + value + "'");
    } else if (key == "regime.t_de") {
        c.regime.t_de = static_cast<Index>(parse_int(key, value));
    } else if (key == "regime.t_swa") {
        c.regime.t_swa = static_cast<Index>(parse_int(key, value));
    } else if (key == "regime.master_seed") {
        c.regime.master_seed = parse_u64(key, value);
    } else if (key == "regime.pin_batch_seed") {
        c.regime.pin_batch_seed = parse_bool(key, value);
    } else if (key == "methods") {
        c.methods.clear();
        for (const auto& item : split_csv(value)) c.methods.insert(method_from_name(item));
    } else if (key == "if.damping") {
        c.if_damping = parse_double(key, value);
    } else if (key == "output_dir") {
        c.output_dir = value;
    } else {
        throw ConfigError("unknown config key: '" + key + "'");
    }
}

}  // namespace

Index ExperimentConfig::implied_training_count(Index n_train) const {
    return wants(Method::Loo) ? regime.t_de * (n_train + 1) : regime.t_de;
}

void ExperimentConfig::validate() const {
    training.validate();
    regime.validate();
    if (training.swa_window != regime.t_swa) {
        throw ConfigError("train.swa_window must equal regime.t_swa");
    }
    if (model_kind == ModelKind::Mlp && hidden_dim < 1) {
        throw ConfigError("model.hidden_dim must be >= 1 for the MLP");
    }
    if (if_damping < 0.0) throw ConfigError("if.damping must be >= 0");
    if (output_dir.empty()) throw ConfigError("output_dir must be set");
    if (dataset == DatasetKind::IdxFile &&
        (idx.image_path.empty() || idx.label_path.empty())) {
        throw ConfigError("idx.image_path and idx.label_path must be set");
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig config;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        apply_key(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    config.validate();
    return config;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buffer;
    buffer << is.rdbuf();
    return parse_config_text(buffer.str());
}

std::string serialize_config(const ExperimentConfig& c) {
    std::map<std::string, std::string> kv;
    kv["dataset"] = c.dataset == DatasetKind::Blobs ? "blobs" : "idx";
    kv["blobs.classes"] = std::to_string(c.blobs.classes);
    kv["blobs.dim"] = std::to_string(c.blobs.dim);
    kv["blobs.train_per_class"] = join_indices(c.blobs.train_per_class);
    kv["blobs.test_per_class"] = join_indices(c.blobs.test_per_class);
    kv["blobs.separation"] = format_double(c.blobs.separation);
    kv["blobs.sigma"] = format_double(c.blobs.sigma);
    kv["blobs.data_seed"] = std::to_string(c.blobs.data_seed);
    kv["idx.image_path"] = c.idx.image_path.string();
    kv["idx.label_path"] = c.idx.label_path.string();
    kv["idx.per_class_train"] = std::to_string(c.idx.per_class_train);
    kv["idx.per_class_test"] = std::to_string(c.idx.per_class_test);
    kv["idx.downscale"] = std::to_string(c.idx.downscale);
    {
        std::string s;
        for (std::size_t i = 0; i < c.idx.keep_classes.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(c.idx.keep_classes[i]);
        }
        kv["idx.keep_classes"] = s;
    }
    kv["idx.max_label"] = std::to_string(c.idx.max_label);
    kv["idx.data_seed"] = std::to_string(c.idx.data_seed);
    kv["model.kind"] = c.model_kind == ModelKind::Mlp ? "mlp" : "logreg";
    kv["model.hidden_dim"] = std::to_string(c.hidden_dim);
    kv["train.optimizer"] = c.training.optimizer == Optimizer::Adam ? "adam" : "sgd";
    kv["train.learning_rate"] = format_double(c.training.learning_rate);
    kv["train.weight_decay"] = format_double(c.training.weight_decay);
    kv["train.batch_size"] = std::to_string(c.training.batch_size);
    kv["train.epochs"] = std::to_string(c.training.epochs);
    kv["train.swa_window"] = std::to_string(c.training.swa_window);
    kv["train.adam_beta1"] = format_double(c.training.adam_beta1);
    kv["train.adam_beta2"] = format_double(c.training.adam_beta2);
    kv["train.adam_eps"] = format_double(c.training.adam_eps);
    kv["regime.kind"] = c.regime.kind == RegimeKind::DeInit ? "de_init" : "de_batch";
    kv["regime.t_de"] = std::to_string(c.regime.t_de);
    kv["regime.t_swa"] = std::to_string(c.regime.t_swa);
    kv["regime.master_seed"] = std::to_string(c.regime.master_seed);
    kv["regime.pin_batch_seed"] = c.regime.pin_batch_seed ? "true" : "false";
    {
        std::string s;
        for (Method m : all_methods()) {
            if (!c.wants(m)) continue;
            if (!s.empty()) s += ",";
            s += method_name(m);
        }
        kv["methods"] = s;
    }
    kv["if.damping"] = format_double(c.if_damping);
    kv["output_dir"] = c.output_dir.string();

    std::string out;
    for (const auto& [key, value] : kv) {
        out += key;
        out += " = ";
        out += value;
        out += "\n";
    }
    return out;
}

std::string config_hash(const ExperimentConfig& config) {
    const std::uint64_t h = fnv1a64(serialize_config(config));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace btda::harness
