#include "ballot/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ballot/error.hpp"

namespace ballot {

MethodSummary summarize(const std::string& method, const EvalReport& report, double wall_time_s) {
  MethodSummary s;
  s.method = method;
  s.accuracy = report.accuracy;
  s.precision = report.macro_precision;
  s.recall = report.macro_recall;
  s.cwv = report.cwv;
  s.mcd = report.mcd;
  s.per_class_acc = report.per_class_acc;
  s.sample_counts = report.sample_counts;
  s.wall_time_s = wall_time_s;
  return s;
}

MethodSummary summarize(const PruneResult& result) {
  MethodSummary s = summarize(to_string(result.method), result.pruned_report, result.wall_time_s);
  s.retention = result.achieved_retention;
  s.rounds = result.refine_rounds_used;
  s.mask = result.mask;
  for (const Candidate& c : result.candidates) {
    s.candidates.push_back({c.round, c.report.accuracy, c.report.cwv, c.report.mcd, c.accuracy_ok,
                            c.fairness_ok});
  }
  return s;
}

namespace {

using ojson = nlohmann::ordered_json;

ojson mask_to_json(const Mask& m) {
  ojson j;
  j["omega"] = m.omega;
  ojson neurons = ojson::array();
  for (const auto& layer : m.neuron_keep) {
    ojson bits = ojson::array();
    for (bool b : layer) bits.push_back(b ? 1 : 0);
    neurons.push_back(std::move(bits));
  }
  j["neuron_keep"] = std::move(neurons);
  j["weight_count"] = m.weight_keep.size();
  ojson trimmed = ojson::array();
  for (std::size_t i = 0; i < m.weight_keep.size(); ++i) {
    if (!m.weight_keep[i]) trimmed.push_back(i);
  }
  j["weight_trim"] = std::move(trimmed);
  return j;
}

Mask mask_from_json(const ojson& j) {
  Mask m;
  m.omega = j.at("omega").get<double>();
  for (const auto& layer : j.at("neuron_keep")) {
    std::vector<bool> bits;
    for (const auto& b : layer) bits.push_back(b.get<int>() != 0);
    m.neuron_keep.push_back(std::move(bits));
  }
  m.weight_keep.assign(j.at("weight_count").get<std::size_t>(), true);
  for (const auto& i : j.at("weight_trim")) {
    const auto idx = i.get<std::size_t>();
    if (idx >= m.weight_keep.size()) throw PersistenceError("mask weight_trim index out of range");
    m.weight_keep[idx] = false;
  }
  return m;
}

ojson summary_to_json(const MethodSummary& s) {
  ojson j;
  j["method"] = s.method;
  j["accuracy"] = s.accuracy;
  j["precision"] = s.precision;
  j["recall"] = s.recall;
  j["cwv"] = s.cwv;
  j["mcd"] = s.mcd;
  j["per_class_acc"] = s.per_class_acc;
  j["sample_counts"] = s.sample_counts;
  j["retention"] = s.retention;
  j["rounds"] = s.rounds;
  j["wall_time_s"] = s.wall_time_s;
  if (s.mask) j["mask"] = mask_to_json(*s.mask);
  if (!s.candidates.empty()) {
    ojson cands = ojson::array();
    for (const auto& c : s.candidates) {
      cands.push_back({{"round", c.round},
                       {"accuracy", c.accuracy},
                       {"cwv", c.cwv},
                       {"mcd", c.mcd},
                       {"accuracy_ok", c.accuracy_ok},
                       {"fairness_ok", c.fairness_ok}});
    }
    j["candidates"] = std::move(cands);
  }
  return j;
}

MethodSummary summary_from_json(const ojson& j) {
  MethodSummary s;
  s.method = j.at("method").get<std::string>();
  s.accuracy = j.at("accuracy").get<double>();
  s.precision = j.at("precision").get<double>();
  s.recall = j.at("recall").get<double>();
  s.cwv = j.at("cwv").get<double>();
  s.mcd = j.at("mcd").get<double>();
  s.per_class_acc = j.at("per_class_acc").get<std::vector<double>>();
  s.sample_counts = j.at("sample_counts").get<std::vector<std::size_t>>();
  s.retention = j.at("retention").get<double>();
  s.rounds = j.at("rounds").get<std::size_t>();
  s.wall_time_s = j.at("wall_time_s").get<double>();
  if (j.contains("mask")) s.mask = mask_from_json(j.at("mask"));
  if (j.contains("candidates")) {
    for (const auto& c : j.at("candidates")) {
      s.candidates.push_back({c.at("round").get<std::size_t>(), c.at("accuracy").get<double>(),
                              c.at("cwv").get<double>(), c.at("mcd").get<double>(),
                              c.at("accuracy_ok").get<bool>(), c.at("fairness_ok").get<bool>()});
    }
  }
  return s;
}

}  // namespace

ojson report_to_json(const ReportFile& r) {
  ojson j;
  j["tool_version"] = r.tool_version;
  j["seed"] = r.seed;
  j["config"] = r.config.is_null() ? ojson::object() : r.config;
  ojson layers = ojson::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"d_in", l.d_in}, {"d_out", l.d_out}, {"activation", to_string(l.activation)}});
  }
  j["network"] = std::move(layers);
  ojson results = ojson::array();
  for (const auto& s : r.results) results.push_back(summary_to_json(s));
  j["results"] = std::move(results);
  return j;
}

ReportFile report_from_json(const ojson& doc) {
  try {
    ReportFile r;
    r.tool_version = doc.at("tool_version").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.config = doc.at("config");
    for (const auto& l : doc.at("network")) {
      r.layers.push_back({l.at("d_in").get<std::size_t>(), l.at("d_out").get<std::size_t>(),
                          activation_from_string(l.at("activation").get<std::string>())});
    }
    for (const auto& s : doc.at("results")) r.results.push_back(summary_from_json(s));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw PersistenceError(std::string("malformed report: ") + e.what());
  } catch (const ConfigError& e) {
    throw PersistenceError(std::string("malformed report: ") + e.what());
  }
}

std::string serialize_report(const ReportFile& report) { return report_to_json(report).dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PersistenceError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw PersistenceError("failed writing " + path.string());
}

void write_report(const ReportFile& report, const std::filesystem::path& path) {
  write_text(path, serialize_report(report));
}

ReportFile read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot read report " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  ojson doc;
  try {
    doc = ojson::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw PersistenceError("report " + path.string() + " is not valid JSON: " + e.what());
  }
  return report_from_json(doc);
}

std::string aggregate_csv(std::vector<AggregateRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const AggregateRow& a, const AggregateRow& b) {
    if (a.method != b.method) return a.method < b.method;
    return a.seed < b.seed;
  });
  std::string out = std::string(kAggregateHeader) + "\n";
  char buf[64];
  auto real = [&](double v) {
    std::snprintf(buf, sizeof(buf), ",%.17g", v);
    out += buf;
  };
  for (const auto& r : rows) {
    out += r.method + "," + std::to_string(r.seed);
    real(r.summary.accuracy);
    real(r.summary.precision);
    real(r.summary.recall);
    real(r.summary.cwv);
    real(r.summary.mcd);
    real(r.summary.retention);
    out += "," + std::to_string(r.summary.rounds);
    real(r.summary.wall_time_s);
    out += "\n";
  }
  return out;
}

}  // namespace ballot
