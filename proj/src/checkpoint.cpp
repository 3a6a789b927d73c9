#include "rmnet/checkpoint.hpp"

#include "rmnet/actions.hpp"
#include "rmnet/dataset_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace rmnet {

namespace {

// Reads one line and checks that its first token is `key`; returns the rest.
std::istringstream expect_line(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("checkpoint: expected '" + key + "', got end of file");
  std::istringstream ss(line);
  std::string head;
  ss >> head;
  if (head != key) throw FormatError("checkpoint: expected '" + key + "', got '" + head + "'");
  return ss;
}

long read_count(std::istream& ss, const std::string& what) {
  long v = -1;
  if (!(ss >> v) || v < 0) throw FormatError("checkpoint: bad " + what);
  return v;
}

std::vector<double> read_numbers(std::istream& in, Index expected, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("checkpoint: truncated " + what);
  std::istringstream ss(line);
  std::vector<double> values;
  std::string tok;
  while (ss >> tok) values.push_back(parse_double_field(tok, "checkpoint " + what));
  if (static_cast<Index>(values.size()) != expected)
    throw FormatError("checkpoint: " + what + " has " + std::to_string(values.size()) +
                      " values, expected " + std::to_string(expected));
  return values;
}

template <typename Derived>
void write_row(std::ostream& out, const Eigen::DenseBase<Derived>& row) {
  for (Index j = 0; j < row.size(); ++j) out << (j ? " " : "") << format_double(row(j));
  out << '\n';
}

}  // namespace

void write_network(std::ostream& out, const Network& net) {
  out << "network " << net.depth() << '\n';
  out << "sizes " << net.input_width();
  for (const auto& w : net.weights) out << ' ' << w.rows();
  out << "\nactivations";
  for (const auto a : net.activations) out << ' ' << to_string(a);
  out << '\n';
  for (std::size_t l = 0; l < net.depth(); ++l) {
    for (Index r = 0; r < net.weights[l].rows(); ++r) write_row(out, net.weights[l].row(r));
    write_row(out, net.biases[l]);
  }
}

Network read_network(std::istream& in) {
  auto header = expect_line(in, "network");
  const long depth = read_count(header, "depth");
  if (depth < 1) throw FormatError("checkpoint: network depth must be >= 1");
  auto sizes_line = expect_line(in, "sizes");
  std::vector<Index> sizes;
  for (long l = 0; l <= depth; ++l) {
    const long s = read_count(sizes_line, "layer size");
    if (s < 1) throw FormatError("checkpoint: layer sizes must be >= 1");
    sizes.push_back(s);
  }
  auto act_line = expect_line(in, "activations");
  Network net;
  for (long l = 0; l < depth; ++l) {
    std::string a;
    if (!(act_line >> a)) throw FormatError("checkpoint: missing activation");
    try {
      net.activations.push_back(parse_activation(a));
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("checkpoint: ") + e.what());
    }
  }
  for (long l = 0; l < depth; ++l) {
    Matrix w(sizes[l + 1], sizes[l]);
    for (Index r = 0; r < w.rows(); ++r) {
      const auto row = read_numbers(in, w.cols(), "weight row of layer " + std::to_string(l));
      for (Index c = 0; c < w.cols(); ++c) w(r, c) = row[c];
    }
    const auto b = read_numbers(in, w.rows(), "bias of layer " + std::to_string(l));
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::Map<const Vector>(b.data(), static_cast<Index>(b.size())));
  }
  return net;
}

void write_model(std::ostream& out, const Model& model) {
  out << "rmnet-model 1\nkind " << model_kind(model) << '\n';
  std::visit(
      [&](const auto& m) {
        out << "d " << m.d << "\nm " << m.m << '\n';
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RidgeModel>) {
          out << "lambda " << format_double(m.lambda) << "\ncoef ";
          write_row(out, m.coef);
        } else if constexpr (std::is_same_v<T, RMNetModel>) {
          write_network(out, m.extractor);
          write_network(out, m.hypothesis);
        } else {
          write_network(out, m.extractor);
          out << "heads " << m.heads.size() << '\n';
          for (const auto& h : m.heads) write_network(out, h);
        }
      },
      model);
}

Model read_model(std::istream& in) {
  auto magic = expect_line(in, "rmnet-model");
  if (read_count(magic, "format version") != 1)
    throw FormatError("checkpoint: unsupported format version");
  auto kind_line = expect_line(in, "kind");
  std::string kind;
  kind_line >> kind;
  auto d_line = expect_line(in, "d");
  const int d = static_cast<int>(read_count(d_line, "d"));
  auto m_line = expect_line(in, "m");
  const int m = static_cast<int>(read_count(m_line, "m"));
  if (m < 1 || m > 20) throw FormatError("checkpoint: m out of range");

  auto check_net = [](const Network& net, Index in, Index out, const char* what) {
    if (net.input_width() != in || net.output_width() != out)
      throw FormatError(std::string("checkpoint: ") + what + " has the wrong shape");
  };
  if (kind == "ridge") {
    RidgeModel r;
    r.d = d;
    r.m = m;
    auto lambda_line = expect_line(in, "lambda");
    std::string tok;
    lambda_line >> tok;
    r.lambda = parse_double_field(tok, "checkpoint lambda");
    std::string line;
    if (!std::getline(in, line) || line.rfind("coef ", 0) != 0)
      throw FormatError("checkpoint: expected 'coef'");
    std::istringstream rest(line.substr(5));
    const auto coef = read_numbers(rest, d + m + 1, "coef");
    r.coef = Eigen::Map<const Vector>(coef.data(), static_cast<Index>(coef.size()));
    return r;
  }
  if (kind == "single-head") {
    RMNetModel r;
    r.d = d;
    r.m = m;
    r.extractor = read_network(in);
    r.hypothesis = read_network(in);
    check_net(r.extractor, d + m, r.hypothesis.input_width(), "extractor");
    check_net(r.hypothesis, r.extractor.output_width(), 1, "hypothesis");
    return r;
  }
  if (kind == "multi-head") {
    MultiHeadModel r;
    r.d = d;
    r.m = m;
    r.extractor = read_network(in);
    auto heads_line = expect_line(in, "heads");
    const long heads = read_count(heads_line, "head count");
    if (heads != num_actions(m)) throw FormatError("checkpoint: head count must be 2^m");
    check_net(r.extractor, d, r.extractor.output_width(), "extractor");
    for (long h = 0; h < heads; ++h) {
      r.heads.push_back(read_network(in));
      check_net(r.heads.back(), r.extractor.output_width(), 1, "head");
    }
    return r;
  }
  throw FormatError("checkpoint: unknown model kind '" + kind + "'");
}

void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  write_model(out, model);
  if (!out) throw FormatError("failed writing " + path);
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return read_model(in);
}

}  // namespace rmnet
