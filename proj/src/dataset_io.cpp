#include "rmnet/dataset_io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace rmnet {

namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double_field(std::string_view s, const std::string& context) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw FormatError(context + ": cannot parse '" + std::string(s) + "' as a number");
  return v;
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + p.string() + "'");
  return out;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot read '" + p.string() + "'");
  return in;
}

}  // namespace

void write_dataset_csv(const ObservationalDataset& ds, std::ostream& out) {
  for (int j = 0; j < ds.d(); ++j) out << 'x' << j << ',';
  for (int j = 0; j < ds.m(); ++j) out << 'a' << j << ',';
  out << "y\n";
  for (Index i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < ds.d(); ++j) out << format_double(ds.X(i, j)) << ',';
    for (int j = 0; j < ds.m(); ++j) out << (ds.A(i, j) == 1.0 ? '1' : '0') << ',';
    out << format_double(ds.y(i)) << '\n';
  }
}

ObservationalDataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset csv: empty file");
  line = strip_cr(line);
  const auto header = split(line);
  int d = 0, m = 0;
  for (std::size_t c = 0; c + 1 < header.size(); ++c) {
    const std::string expect_x = "x" + std::to_string(d);
    const std::string expect_a = "a" + std::to_string(m);
    if (m == 0 && header[c] == expect_x) {
      ++d;
    } else if (header[c] == expect_a) {
      ++m;
    } else {
      throw FormatError("dataset csv: unexpected header column '" + std::string(header[c]) + "'");
    }
  }
  if (header.back() != "y" || m == 0)
    throw FormatError("dataset csv: header must be x0..,a0..,y");

  std::vector<double> values;
  Index rows = 0;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    ++rows;
    const auto fields = split(line);
    if (fields.size() != header.size())
      throw FormatError("dataset csv: row " + std::to_string(rows) + " has wrong column count");
    for (const auto f : fields)
      values.push_back(parse_double_field(f, "dataset csv row " + std::to_string(rows)));
  }
  const Index cols = d + m + 1;
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      table(values.data(), rows, cols);
  ObservationalDataset ds;
  ds.X = table.leftCols(d);
  ds.A = table.middleCols(d, m);
  ds.y = table.col(cols - 1);
  if (((ds.A.array() != 0.0) && (ds.A.array() != 1.0)).any())
    throw FormatError("dataset csv: action entries must be 0 or 1");
  return ds;
}

void write_oracle_csv(const OracleTable& oracle, std::ostream& out) {
  out << "x_row,action_index,y\n";
  for (Index i = 0; i < oracle.rows(); ++i)
    for (Index j = 0; j < oracle.values.cols(); ++j)
      if (oracle.feasible(i, j))
        out << i << ',' << j << ',' << format_double(oracle.values(i, j)) << '\n';
}

OracleTable read_oracle_csv(std::istream& in, Index rows, int m) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "x_row,action_index,y")
    throw FormatError("oracle csv: header must be x_row,action_index,y");
  OracleTable t;
  t.m = m;
  t.values = Matrix::Constant(rows, Index{1} << m, std::numeric_limits<double>::quiet_NaN());
  Index line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line);
    const std::string ctx = "oracle csv line " + std::to_string(line_no);
    if (f.size() != 3) throw FormatError(ctx + ": expected 3 columns");
    const double r = parse_double_field(f[0], ctx);
    const double a = parse_double_field(f[1], ctx);
    if (r < 0 || r >= static_cast<double>(rows) || a < 0 ||
        a >= static_cast<double>(t.values.cols()) || r != std::floor(r) || a != std::floor(a))
      throw FormatError(ctx + ": row or action index out of range");
    t.values(static_cast<Index>(r), static_cast<Index>(a)) = parse_double_field(f[2], ctx);
  }
  return t;
}

std::string metadata_json(const std::map<std::string, std::string>& meta) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : meta) j[k] = v;
  return j.dump(2) + "\n";
}

std::map<std::string, std::string> parse_metadata_json(const std::string& text) {
  std::map<std::string, std::string> meta;
  try {
    const auto j = nlohmann::json::parse(text);
    for (auto it = j.begin(); it != j.end(); ++it)
      meta[it.key()] = it->is_string() ? it->get<std::string>() : it->dump();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metadata: ") + e.what());
  }
  return meta;
}

void write_benchmark(const Benchmark& b, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  {
    auto out = open_out(root / "train.csv");
    write_dataset_csv(b.train, out);
  }
  {
    auto out = open_out(root / "val.csv");
    write_dataset_csv(b.val, out);
  }
  {
    auto out = open_out(root / "test.csv");
    write_dataset_csv(b.test, out);
  }
  {
    auto out = open_out(root / "val_oracle.csv");
    write_oracle_csv(b.val_oracle, out);
  }
  {
    auto out = open_out(root / "test_oracle.csv");
    write_oracle_csv(b.test_oracle, out);
  }
  auto out = open_out(root / "meta.json");
  out << metadata_json(b.metadata);
}

Benchmark read_benchmark(const std::string& dir) {
  const fs::path root(dir);
  Benchmark b;
  {
    auto in = open_in(root / "meta.json");
    std::stringstream ss;
    ss << in.rdbuf();
    b.metadata = parse_metadata_json(ss.str());
  }
  auto meta_double = [&](const char* key) {
    const auto it = b.metadata.find(key);
    if (it == b.metadata.end()) throw FormatError(std::string("meta.json: missing ") + key);
    return parse_double_field(it->second, std::string("meta.json ") + key);
  };
  const double y_mean = meta_double("y_mean");
  const double y_std = meta_double("y_std");
  auto load = [&](const char* name) {
    auto in = open_in(root / name);
    ObservationalDataset ds = read_dataset_csv(in);
    ds.y_mean = y_mean;
    ds.y_std = y_std;
    return ds;
  };
  b.train = load("train.csv");
  b.val = load("val.csv");
  b.test = load("test.csv");
  const int m = b.train.m();
  {
    auto in = open_in(root / "val_oracle.csv");
    b.val_oracle = read_oracle_csv(in, b.val.size(), m);
  }
  {
    auto in = open_in(root / "test_oracle.csv");
    b.test_oracle = read_oracle_csv(in, b.test.size(), m);
  }
  return b;
}

}  // namespace rmnet
