#include "ballot/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ballot/error.hpp"
#include "ballot/random.hpp"

namespace ballot {

void DatasetSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError(field + ": " + why);
  };
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail("data.split", "must lie in (0, 1)");
  if (csv_path) {
    if (label_column.empty()) fail("data.csv.label_column", "must not be empty");
    if (csv_classes && *csv_classes < 2) fail("data.csv.classes", "needs at least 2 classes");
    return;
  }
  if (synthetic.counts.size() < 2) fail("data.synthetic.counts", "needs at least 2 classes");
  for (std::size_t c : synthetic.counts) {
    if (c < 2) fail("data.synthetic.counts", "every class needs at least 2 samples");
  }
  if (synthetic.dim == 0) fail("data.synthetic.dim", "must be positive");
  if (!(synthetic.mean_scale >= 0.0) || !std::isfinite(synthetic.mean_scale)) {
    fail("data.synthetic.mean_scale", "must be non-negative");
  }
  if (!(synthetic.stddev >= 0.0) || !std::isfinite(synthetic.stddev)) {
    fail("data.synthetic.std", "must be non-negative");
  }
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  Rng rng(derive_seed(spec.seed, Stream::data));
  const std::size_t d = spec.dim;
  std::vector<std::vector<double>> means;
  for (std::size_t c = 0; c < spec.classes(); ++c) {
    std::vector<double> m(d);
    double norm = 0.0;
    while (norm == 0.0) {
      norm = 0.0;
      for (double& v : m) {
        v = rng.normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
    }
    for (double& v : m) v = v / norm * spec.mean_scale;
    means.push_back(std::move(m));
  }

  std::size_t n = 0;
  for (std::size_t c : spec.counts) n += c;
  Dataset out;
  out.num_classes = spec.classes();
  out.features = Tensor({n, d});
  out.labels.reserve(n);
  std::size_t row = 0;
  for (std::size_t c = 0; c < spec.classes(); ++c) {
    for (std::size_t i = 0; i < spec.counts[c]; ++i, ++row) {
      auto r = out.features.row(row);
      for (std::size_t j = 0; j < d; ++j) r[j] = means[c][j] + spec.stddev * rng.normal();
      out.labels.push_back(c);
    }
  }
  return out;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

std::string cell_where(std::size_t line, const std::string& column) {
  return "line " + std::to_string(line) + ", column '" + column + "'";
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::string& label_column,
                  std::optional<std::size_t> num_classes) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV is empty (header row required)");
  const auto header = split_fields(line);
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) throw DataError("CSV has no column named '" + label_column + "'");
  const auto label_idx = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t d = header.size() - 1;
  if (d == 0) throw DataError("CSV has no feature columns");

  std::vector<double> values;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> label_lines;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " cells, header has " + std::to_string(header.size()));
    }
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const std::string& f = fields[j];
      const char* first = f.data();
      const char* last = f.data() + f.size();
      if (j == label_idx) {
        std::size_t y = 0;
        const auto [ptr, ec] = std::from_chars(first, last, y);
        if (ec != std::errc() || ptr != last || f.empty()) {
          throw DataError(cell_where(line_no, header[j]) + ": label '" + f +
                          "' is not a non-negative integer");
        }
        labels.push_back(y);
        label_lines.push_back(line_no);
      } else {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last || f.empty() || !std::isfinite(v)) {
          throw DataError(cell_where(line_no, header[j]) + ": '" + f + "' is not numeric");
        }
        values.push_back(v);
      }
    }
  }
  if (labels.empty()) throw DataError("CSV has no data rows");

  // Without an explicit count, C is the length of the run 0, 1, 2, ... of
  // labels present; anything beyond a gap is reported with its line.
  std::size_t classes = 0;
  if (num_classes) {
    classes = *num_classes;
  } else {
    std::vector<bool> present;
    for (std::size_t y : labels) {
      if (y < labels.size()) {
        if (present.size() <= y) present.resize(y + 1, false);
        present[y] = true;
      }
    }
    while (classes < present.size() && present[classes]) ++classes;
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw DataError("line " + std::to_string(label_lines[i]) + ": label " +
                      std::to_string(labels[i]) + " outside the " + std::to_string(classes) +
                      " known classes");
    }
  }

  Dataset out;
  out.num_classes = classes;
  out.features = Tensor({labels.size(), d}, std::move(values));
  out.labels = std::move(labels);
  const auto counts = out.class_counts();
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] == 0) throw DataError("class " + std::to_string(c) + " is absent from the CSV");
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 std::optional<std::size_t> num_classes) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), label_column, num_classes);
}

std::string to_csv(const Dataset& data) {
  std::string out;
  for (std::size_t j = 0; j < data.dim(); ++j) out += "f" + std::to_string(j) + ",";
  out += "label\n";
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.features.row(i)) {
      std::snprintf(buf, sizeof(buf), "%.17g,", v);
      out += buf;
    }
    out += std::to_string(data.labels[i]) + "\n";
  }
  return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PersistenceError("cannot open " + path.string() + " for writing");
  const std::string text = to_csv(data);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw PersistenceError("failed writing " + path.string());
}

DataSplit split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed,
                        bool normalize) {
  data.validate();
  Rng rng(derive_seed(seed, Stream::split));
  DataSplit split;
  for (std::size_t c = 0; c < data.num_classes; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.labels[i] == c) rows.push_back(i);
    }
    if (rows.size() < 2) {
      throw DataError("class " + std::to_string(c) + " needs at least 2 samples to split");
    }
    rng.shuffle(std::span(rows));
    auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(rows.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);
    split.train_rows.insert(split.train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test_rows.insert(split.test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(split.train_rows.begin(), split.train_rows.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  split.train = data.subset(split.train_rows);
  split.test = data.subset(split.test_rows);

  if (normalize) {
    const std::size_t d = data.dim();
    const auto n = static_cast<double>(split.train.size());
    split.feature_mean.assign(d, 0.0);
    split.feature_scale.assign(d, 0.0);
    for (std::size_t i = 0; i < split.train.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) split.feature_mean[j] += split.train.features(i, j);
    }
    for (double& m : split.feature_mean) m /= n;
    for (std::size_t i = 0; i < split.train.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = split.train.features(i, j) - split.feature_mean[j];
        split.feature_scale[j] += diff * diff;
      }
    }
    for (double& s : split.feature_scale) {
      s = std::sqrt(s / n);
      if (s == 0.0) s = 1.0;
    }
    for (Dataset* part : {&split.train, &split.test}) {
      for (std::size_t i = 0; i < part->size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          part->features(i, j) = (part->features(i, j) - split.feature_mean[j]) / split.feature_scale[j];
        }
      }
    }
  }
  return split;
}

DataSplit prepare_data(const DatasetSpec& spec) {
  spec.validate();
  const Dataset data = spec.csv_path ? load_csv(*spec.csv_path, spec.label_column, spec.csv_classes)
                                     : gen_synthetic(spec.synthetic);
  return split_dataset(data, spec.train_fraction, spec.split_seed, spec.normalize);
}

}  // namespace ballot
