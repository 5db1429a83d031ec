#include "cdattack/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace cdattack::io {

namespace {

std::string strip_comment(const std::string& line) {
  std::string s = line.substr(0, line.find('#'));
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  return s;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    const auto first = cell.find_first_not_of(' ');
    cells.push_back(first == std::string::npos ? std::string() : cell.substr(first));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

long parse_id(const std::string& token, const std::string& name, std::size_t line) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(name, line, "expected a non-negative integer id, got '" + token + "'");
  }
  if (value < 0) throw ParseError(name, line, "negative node id " + token);
  return value;
}

double parse_real(const std::string& token, const std::string& name, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ParseError(name, line, "expected a real value, got '" + token + "'");
  }
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

Graph read_graph(std::istream& edges, std::istream* features, const std::string& edge_name,
                 const std::string& feature_name) {
  struct RawEdge {
    long u, v;
    std::size_t line;
  };
  std::vector<RawEdge> raw;
  std::map<Edge, std::size_t> first_seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(edges, line)) {
    ++lineno;
    const std::string body = strip_comment(line);
    if (blank(body)) continue;
    std::istringstream tokens(body);
    std::string a, b, extra;
    if (!(tokens >> a >> b) || (tokens >> extra)) throw ParseError(edge_name, lineno, "expected exactly two node ids");
    const long u = parse_id(a, edge_name, lineno);
    const long v = parse_id(b, edge_name, lineno);
    if (u == v) throw ParseError(edge_name, lineno, "self-loop on node " + a);
    const Edge e = make_edge(static_cast<NodeId>(u), static_cast<NodeId>(v));
    if (auto [it, fresh] = first_seen.emplace(e, lineno); !fresh) {
      throw ParseError(edge_name, lineno,
                       "duplicate edge " + a + " " + b + " (first seen on line " + std::to_string(it->second) + ")");
    }
    raw.push_back({u, v, lineno});
  }
  long max_id = -1;
  for (const RawEdge& e : raw) max_id = std::max({max_id, e.u, e.v});

  Matrix x;
  Index n = 0;
  if (features == nullptr) {
    n = max_id + 1;
    x = Matrix::Identity(n, n);
  } else {
    struct Row {
      long id;
      std::vector<double> values;
      std::size_t line;
    };
    std::vector<Row> rows;
    lineno = 0;
    Index dim = -1;
    while (std::getline(*features, line)) {
      ++lineno;
      if (blank(line)) continue;
      const auto cells = split_csv(line);
      if (dim < 0) {
        if (cells.empty() || cells[0] != "id") throw ParseError(feature_name, lineno, "header must start with 'id'");
        dim = static_cast<Index>(cells.size()) - 1;
        for (Index f = 0; f < dim; ++f) {
          if (cells[f + 1] != "f" + std::to_string(f)) {
            throw ParseError(feature_name, lineno, "header column " + std::to_string(f + 1) + " must be f" +
                                                       std::to_string(f));
          }
        }
        continue;
      }
      if (static_cast<Index>(cells.size()) != dim + 1) {
        throw ParseError(feature_name, lineno,
                         "expected " + std::to_string(dim + 1) + " columns, got " + std::to_string(cells.size()));
      }
      std::vector<double> values(static_cast<std::size_t>(dim));
      for (Index f = 0; f < dim; ++f) values[f] = parse_real(cells[f + 1], feature_name, lineno);
      rows.push_back({parse_id(cells[0], feature_name, lineno), std::move(values), lineno});
    }
    if (dim < 0) throw ParseError(feature_name, lineno, "missing header row");
    n = static_cast<Index>(rows.size());
    x.resize(n, dim);
    std::vector<bool> filled(static_cast<std::size_t>(n), false);
    for (const auto& [id, values, row_line] : rows) {
      if (id >= n) {
        throw ParseError(feature_name, row_line, "node id " + std::to_string(id) + " out of range for " +
                                                   std::to_string(n) + " feature rows");
      }
      if (filled[id]) throw ParseError(feature_name, row_line, "duplicate feature row for node " + std::to_string(id));
      filled[id] = true;
      for (Index f = 0; f < dim; ++f) x(id, f) = values[f];
    }
    if (max_id >= n) {
      const auto& offender = *std::find_if(raw.begin(), raw.end(), [&](const RawEdge& e) { return std::max(e.u, e.v) >= n; });
      throw ParseError(edge_name, offender.line,
                       "dangling node id " + std::to_string(std::max(offender.u, offender.v)) + ": feature file has " +
                           std::to_string(n) + " rows, expected at least " + std::to_string(max_id + 1));
    }
  }
  std::vector<Edge> list;
  list.reserve(raw.size());
  for (const RawEdge& e : raw) list.push_back(make_edge(static_cast<NodeId>(e.u), static_cast<NodeId>(e.v)));
  return Graph(n, std::move(list), std::move(x));
}

Graph load_graph(const std::string& edge_path, const std::optional<std::string>& feature_path) {
  std::ifstream edges = open_in(edge_path);
  if (!feature_path) return read_graph(edges, nullptr, edge_path);
  std::ifstream features = open_in(*feature_path);
  return read_graph(edges, &features, edge_path, *feature_path);
}

void write_edges(std::ostream& out, const Graph& g) {
  out << "# nodes " << g.num_nodes() << " edges " << g.num_edges() << "\n";
  for (const Edge& e : g.edges()) out << e.u << ' ' << e.v << '\n';
}

void write_features(std::ostream& out, const Matrix& features) {
  out << "id";
  for (Index f = 0; f < features.cols(); ++f) out << ",f" << f;
  out << '\n';
  for (Index i = 0; i < features.rows(); ++i) {
    out << i;
    for (Index f = 0; f < features.cols(); ++f) out << ',' << format_real(features(i, f));
    out << '\n';
  }
}

void save_graph(const Graph& g, const std::string& edge_path, const std::string& feature_path) {
  std::ofstream edges = open_out(edge_path);
  write_edges(edges, g);
  std::ofstream features = open_out(feature_path);
  write_features(features, g.features());
}

void write_edits(std::ostream& out, const EditSet& edits) {
  for (const Edge& e : edits.deleted) out << "DEL " << e.u << ' ' << e.v << '\n';
  for (const Edge& e : edits.inserted) out << "INS " << e.u << ' ' << e.v << '\n';
}

EditSet read_edits(std::istream& in, const std::string& name) {
  EditSet edits;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = strip_comment(line);
    if (blank(body)) continue;
    std::istringstream tokens(body);
    std::string kind, a, b, extra;
    if (!(tokens >> kind >> a >> b) || (tokens >> extra)) throw ParseError(name, lineno, "expected 'DEL u v' or 'INS u v'");
    const long u = parse_id(a, name, lineno);
    const long v = parse_id(b, name, lineno);
    if (u == v) throw ParseError(name, lineno, "self-loop edit");
    const Edge e = make_edge(static_cast<NodeId>(u), static_cast<NodeId>(v));
    if (kind == "DEL") {
      edits.deleted.push_back(e);
    } else if (kind == "INS") {
      edits.inserted.push_back(e);
    } else {
      throw ParseError(name, lineno, "unknown edit kind '" + kind + "'");
    }
  }
  return edits;
}

void save_edits(const EditSet& edits, const std::string& path) {
  std::ofstream out = open_out(path);
  write_edits(out, edits);
}

EditSet load_edits(const std::string& path) {
  std::ifstream in = open_in(path);
  return read_edits(in, path);
}

void write_labels(std::ostream& out, const std::vector<int>& labels) {
  out << "id,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

void save_labels(const std::vector<int>& labels, const std::string& path) {
  std::ofstream out = open_out(path);
  write_labels(out, labels);
}

std::vector<int> read_labels(std::istream& in, const std::string& name) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::pair<long, int>> rows;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const auto cells = split_csv(line);
    if (!header) {
      if (cells.size() != 2 || cells[0] != "id" || cells[1] != "label") throw ParseError(name, lineno, "header must be 'id,label'");
      header = true;
      continue;
    }
    if (cells.size() != 2) throw ParseError(name, lineno, "expected 2 columns");
    rows.emplace_back(parse_id(cells[0], name, lineno), static_cast<int>(parse_id(cells[1], name, lineno)));
  }
  std::vector<int> labels(rows.size(), -1);
  for (const auto& [id, label] : rows) {
    if (id >= static_cast<long>(rows.size()) || labels[id] != -1) throw ParseError(name, 0, "label ids must cover 0..N-1 once");
    labels[id] = label;
  }
  return labels;
}

std::vector<int> load_labels(const std::string& path) {
  std::ifstream in = open_in(path);
  return read_labels(in, path);
}

}  // namespace cdattack::io
