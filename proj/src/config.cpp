#include "ballot/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ballot/error.hpp"

namespace ballot {

namespace {

using nlohmann::json;

// Object reader that remembers which keys were consumed so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key);
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& at(const std::string& key) const { return node_.at(key); }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    out = convert<T>(node_.at(key), key_path(key));
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(node_.at(key), key_path(key));
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError(key_path(it.key()) + ": unknown key");
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path + ": expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
        throw ConfigError(path + ": expected a non-negative integer");
      }
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path + ": expected a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path + ": expected a string");
      return v.get<std::string>();
    } else {
      if (!v.is_array()) throw ConfigError(path + ": expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
      }
      return out;
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig parse_config(const json& doc) {
  RunConfig cfg;
  Section root(doc, "");
  bool rewind_given = false;

  if (root.has("model")) {
    auto s = root.child("model");
    s.read("hidden", cfg.train.hidden);
    s.finish();
  }
  if (root.has("train")) {
    auto s = root.child("train");
    s.read("epochs", cfg.train.epochs);
    s.read("lr0", cfg.train.lr0);
    s.read("batch", cfg.train.batch_size);
    s.read("milestones", cfg.train.milestone_fractions);
    if (s.has("class_weight_split")) {
      const auto v = Section::convert<std::string>(s.at("class_weight_split"),
                                                   s.key_path("class_weight_split"));
      if (v == "train") {
        cfg.train.class_weight_split = WeightSplit::train;
      } else if (v == "test") {
        cfg.train.class_weight_split = WeightSplit::test;
      } else {
        throw ConfigError(s.key_path("class_weight_split") + ": expected 'train' or 'test'");
      }
    }
    s.finish();
  }
  if (root.has("prune")) {
    auto s = root.child("prune");
    s.read("omega", cfg.train.omega);
    s.read("gamma", cfg.train.gamma);
    s.read("eta", cfg.train.eta);
    if (s.has("method")) {
      const auto name = Section::convert<std::string>(s.at("method"), s.key_path("method"));
      try {
        cfg.method = prune_method_from_string(name);
      } catch (const ConfigError& e) {
        throw ConfigError(s.key_path("method") + ": " + e.what());
      }
    }
    s.finish();
  }
  if (root.has("refine")) {
    auto s = root.child("refine");
    rewind_given = s.has("rewind_epoch");
    s.read("rewind_epoch", cfg.train.rewind_epoch);
    s.read("epsilon", cfg.train.epsilon);
    s.read("delta", cfg.train.delta);
    s.read("max_rounds", cfg.train.max_refine_rounds);
    s.finish();
  }
  if (root.has("data")) {
    auto s = root.child("data");
    const bool has_synth = s.has("synthetic");
    const bool has_csv = s.has("csv");
    if (has_synth && has_csv) throw ConfigError("data: give either 'synthetic' or 'csv', not both");
    if (has_synth) {
      auto syn = s.child("synthetic");
      syn.read("counts", cfg.data.synthetic.counts);
      syn.read("dim", cfg.data.synthetic.dim);
      syn.read("mean_scale", cfg.data.synthetic.mean_scale);
      syn.read("std", cfg.data.synthetic.stddev);
      syn.read("seed", cfg.data.synthetic.seed);
      syn.finish();
    }
    if (has_csv) {
      auto csv = s.child("csv");
      std::string path;
      if (!csv.has("path")) throw ConfigError("data.csv.path: required");
      csv.read("path", path);
      cfg.data.csv_path = path;
      csv.read("label_column", cfg.data.label_column);
      if (csv.has("classes")) {
        cfg.data.csv_classes = Section::convert<std::size_t>(csv.at("classes"), csv.key_path("classes"));
      }
      csv.finish();
    }
    s.read("split", cfg.data.train_fraction);
    s.read("normalize", cfg.data.normalize);
    s.read("split_seed", cfg.data.split_seed);
    s.finish();
  }
  root.read("seed", cfg.train.seed);
  root.finish();

  if (!rewind_given && cfg.train.epochs > 0) {
    cfg.train.rewind_epoch = std::min<std::size_t>(cfg.train.rewind_epoch, cfg.train.epochs - 1);
  }
  cfg.train.validate();
  cfg.data.validate();
  return cfg;
}

RunConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["model"] = {{"hidden", c.train.hidden}};
  j["train"] = {{"epochs", c.train.epochs},
                {"lr0", c.train.lr0},
                {"batch", c.train.batch_size},
                {"milestones", c.train.milestone_fractions},
                {"class_weight_split",
                 c.train.class_weight_split == WeightSplit::train ? "train" : "test"}};
  j["prune"] = {{"omega", c.train.omega},
                {"gamma", c.train.gamma},
                {"eta", c.train.eta},
                {"method", to_string(c.method)}};
  j["refine"] = {{"rewind_epoch", c.train.rewind_epoch},
                 {"epsilon", c.train.epsilon},
                 {"delta", c.train.delta},
                 {"max_rounds", c.train.max_refine_rounds}};
  nlohmann::ordered_json data;
  if (c.data.csv_path) {
    nlohmann::ordered_json csv = {{"path", c.data.csv_path->string()},
                                  {"label_column", c.data.label_column}};
    if (c.data.csv_classes) csv["classes"] = *c.data.csv_classes;
    data["csv"] = csv;
  } else {
    data["synthetic"] = {{"counts", c.data.synthetic.counts},
                         {"dim", c.data.synthetic.dim},
                         {"mean_scale", c.data.synthetic.mean_scale},
                         {"std", c.data.synthetic.stddev},
                         {"seed", c.data.synthetic.seed}};
  }
  data["split"] = c.data.train_fraction;
  data["normalize"] = c.data.normalize;
  data["split_seed"] = c.data.split_seed;
  j["data"] = data;
  j["seed"] = c.train.seed;
  return j;
}

}  // namespace ballot
