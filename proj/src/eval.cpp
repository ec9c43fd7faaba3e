#include "artrecon/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "artrecon/error.hpp"

namespace artrecon {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_pair(const Embedding& a, const Embedding& b) {
  a.validate();
  b.validate();
  if (a.values.size() != b.values.size()) {
    throw std::invalid_argument("embedding dimensions differ (" + std::to_string(a.values.size()) +
                                " vs " + std::to_string(b.values.size()) + ")");
  }
}

}  // namespace

void Embedding::validate() const {
  if (values.empty()) throw std::invalid_argument("embedding '" + label + "' is empty");
  bool nonzero = false;
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("embedding '" + label + "' is not finite");
    nonzero = nonzero || v != 0.0;
  }
  if (!nonzero) throw std::invalid_argument("embedding '" + label + "' is the zero vector");
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  check_pair(a, b);
  const double s = dot(a.values, b.values) /
                   (std::sqrt(dot(a.values, a.values)) * std::sqrt(dot(b.values, b.values)));
  return std::clamp(s, -1.0, 1.0);
}

double dot_if_normalized(const Embedding& a, const Embedding& b) {
  check_pair(a, b);
  for (const Embedding* e : {&a, &b}) {
    const double norm = std::sqrt(dot(e->values, e->values));
    if (std::abs(norm - 1.0) > 1e-4) {
      throw std::invalid_argument("embedding '" + e->label + "' has norm " + std::to_string(norm) +
                                  "; use cosine_similarity for un-normalized vectors");
    }
  }
  return dot(a.values, b.values);
}

SimilarityReport mean_similarity(std::span<const std::pair<Embedding, Embedding>> pairs) {
  if (pairs.empty()) throw std::invalid_argument("mean similarity needs at least one pair");
  SimilarityReport r;
  r.scores.reserve(pairs.size());
  double sum = 0.0;
  for (const auto& [a, b] : pairs) {
    r.scores.push_back(cosine_similarity(a, b));
    sum += r.scores.back();
  }
  r.count = pairs.size();
  r.mean = sum / static_cast<double>(r.count);
  return r;
}

std::vector<Embedding> load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open embedding file '" + path.string() + "'");
  const std::string src = path.string();

  std::vector<Embedding> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto where = src + ":" + std::to_string(line_no);

    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) throw FormatError(where + ": expected label<TAB>d<TAB>values");

    Embedding e;
    e.label = line.substr(0, tab1);
    if (e.label.empty()) throw FormatError(where + ": empty label");
    std::size_t dim = 0;
    {
      std::istringstream ds(line.substr(tab1 + 1, tab2 - tab1 - 1));
      long long d = 0;
      if (!(ds >> d) || d < 1 || !(ds >> std::ws).eof()) {
        throw FormatError(where + ": invalid dimension");
      }
      dim = static_cast<std::size_t>(d);
    }
    std::istringstream vs(line.substr(tab2 + 1));
    vs.imbue(std::locale::classic());
    std::string tok;
    while (vs >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        throw FormatError(where + ": invalid value '" + tok + "'");
      }
      if (used != tok.size()) throw FormatError(where + ": invalid value '" + tok + "'");
      e.values.push_back(v);
    }
    if (e.values.size() != dim) {
      throw FormatError(where + ": declared dimension " + std::to_string(dim) + " but found " +
                        std::to_string(e.values.size()) + " values");
    }
    if (!out.empty() && out.front().values.size() != dim) {
      throw FormatError(where + ": dimension " + std::to_string(dim) +
                        " differs from the file's dimension " +
                        std::to_string(out.front().values.size()));
    }
    try {
      e.validate();
    } catch (const std::invalid_argument& err) {
      throw FormatError(where + ": " + err.what());
    }
    out.push_back(std::move(e));
  }
  if (out.empty()) throw FormatError("embedding file '" + src + "' holds no records");
  return out;
}

void save_embeddings(std::span<const Embedding> embeddings, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.imbue(std::locale::classic());
  out << std::setprecision(17);
  for (const auto& e : embeddings) {
    out << e.label << '\t' << e.values.size() << '\t';
    for (std::size_t i = 0; i < e.values.size(); ++i) out << (i ? " " : "") << e.values[i];
    out << '\n';
  }
}

EvaluationTable evaluate(const std::vector<Embedding>& artworks,
                         const std::vector<std::pair<std::string, std::vector<Embedding>>>& renders) {
  if (artworks.empty()) throw InputError("no artwork embeddings");
  if (renders.empty()) throw InputError("no render embeddings");

  EvaluationTable table;
  std::set<std::string> art_labels;
  for (const auto& a : artworks) {
    if (!art_labels.insert(a.label).second) throw InputError("duplicate artwork label '" + a.label + "'");
    table.artworks.push_back(a.label);
  }

  for (const auto& [method, embeddings] : renders) {
    std::map<std::string, const Embedding*> by_label;
    for (const auto& e : embeddings) {
      if (!by_label.emplace(e.label, &e).second) {
        throw InputError("duplicate render label '" + e.label + "' for method '" + method + "'");
      }
    }
    std::vector<std::string> unmatched;
    for (const auto& a : artworks) {
      if (!by_label.count(a.label)) unmatched.push_back(a.label + " (no render for " + method + ")");
    }
    for (const auto& [label, e] : by_label) {
      if (!art_labels.count(label)) unmatched.push_back(label + " (no artwork, method " + method + ")");
    }
    if (!unmatched.empty()) {
      std::string msg = "unmatched labels:";
      for (const auto& u : unmatched) msg += "\n  " + u;
      throw InputError(msg);
    }

    std::vector<std::pair<Embedding, Embedding>> pairs;
    for (const auto& a : artworks) pairs.emplace_back(a, *by_label.at(a.label));
    table.methods.push_back(method);
    table.per_method[method] = mean_similarity(pairs);
  }
  return table;
}

void write_table(const EvaluationTable& table, std::ostream& out) {
  std::size_t label_width = std::string("Mean").size();
  for (const auto& a : table.artworks) label_width = std::max(label_width, a.size());
  std::vector<std::size_t> widths;
  for (const auto& m : table.methods) widths.push_back(std::max<std::size_t>(m.size(), 7));

  auto cell = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return std::string(buf);
  };
  auto row = [&](const std::string& label, const std::vector<std::string>& cells) {
    out << std::left << std::setw(static_cast<int>(label_width)) << label;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out << "  " << std::right << std::setw(static_cast<int>(widths[c])) << cells[c];
    }
    out << '\n';
  };

  row("Artwork", table.methods);
  std::size_t total = label_width;
  for (auto w : widths) total += 2 + w;
  out << std::string(total, '-') << '\n';
  for (std::size_t r = 0; r < table.artworks.size(); ++r) {
    std::vector<std::string> cells;
    for (const auto& m : table.methods) cells.push_back(cell(table.per_method.at(m).scores[r]));
    row(table.artworks[r], cells);
  }
  out << std::string(total, '-') << '\n';
  std::vector<std::string> means;
  for (const auto& m : table.methods) means.push_back(cell(table.per_method.at(m).mean));
  row("Mean", means);
}

}  // namespace artrecon
