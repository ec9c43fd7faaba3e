#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace artrecon {

/// Labelled embedding vector (finite, non-zero).
struct Embedding {
  std::string label;
  std::vector<double> values;

  void validate() const;
};

/// dot(a, b) / (|a| |b|), clamped to [-1, 1].
double cosine_similarity(const Embedding& a, const Embedding& b);

/// Plain dot product for vectors already within 1e-4 of unit norm.
double dot_if_normalized(const Embedding& a, const Embedding& b);

struct SimilarityReport {
  std::vector<double> scores;  // pair order preserved
  double mean = 0.0;
  std::size_t count = 0;
};

SimilarityReport mean_similarity(std::span<const std::pair<Embedding, Embedding>> pairs);

/// One "label<TAB>d<TAB>v1 v2 ... vd" record per line; every record in a
/// file must share the same dimension.
std::vector<Embedding> load_embeddings(const std::filesystem::path& path);
void save_embeddings(std::span<const Embedding> embeddings, const std::filesystem::path& path);

/// Artwork embeddings compared against per-method render embeddings.
struct EvaluationTable {
  std::vector<std::string> artworks;  // row order
  std::vector<std::string> methods;   // column order
  std::map<std::string, SimilarityReport> per_method;
};

/// Pairs each artwork with the render sharing its label, for every method.
/// Throws InputError listing labels that do not appear on both sides.
EvaluationTable evaluate(const std::vector<Embedding>& artworks,
                         const std::vector<std::pair<std::string, std::vector<Embedding>>>& renders);

/// Artwork x method score table followed by the per-method mean row.
void write_table(const EvaluationTable& table, std::ostream& out);

}  // namespace artrecon
