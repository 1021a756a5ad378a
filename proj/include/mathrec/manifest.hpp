#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mathrec/counting.hpp"
#include "mathrec/image.hpp"
#include "mathrec/latex.hpp"
#include "mathrec/posforest.hpp"

namespace mathrec::data {

/// One manifest line: an image reference plus its supervision targets.
/// counts holds only nonzero classes, sorted by token.
struct ManifestRecord {
  std::string image_path;  // relative to the manifest's directory
  latex::TokenSeq tokens;
  std::vector<int> depths;
  std::vector<forest::RelPos> relpos;
  std::vector<std::pair<std::string, long long>> counts;

  bool operator==(const ManifestRecord&) const = default;
};

/// A fully loaded training sample. Labels and counts always equal the values
/// derived from tokens; load_samples enforces this.
struct ExprSample {
  Image image;
  latex::TokenSeq tokens;
  forest::PositionLabelSeq labels;
  counting::CountVector counts;
};

/// Derives depth/relpos/count fields from the token sequence.
ManifestRecord make_record(const std::string& image_path, const latex::TokenSeq& tokens,
                           const latex::Vocab& vocab);

/// Tab-separated fields, space-separated items within a field, one record per
/// line. load(write(x)) = x.
void write_manifest(const std::vector<ManifestRecord>& records, const std::string& path);
std::vector<ManifestRecord> load_manifest(const std::string& path);

/// Renders n synthetic expressions into dir/images/*.pgm and writes
/// dir/manifest.tsv plus dir/vocab.txt. Bit-reproducible for a given seed.
std::vector<ManifestRecord> build_synthetic_corpus(const std::string& dir, std::uint64_t seed,
                                                   int n, int max_depth);

/// Loads records plus their images and re-validates labels/counts against the
/// token sequences.
std::vector<ExprSample> load_samples(const std::string& manifest_path, const latex::Vocab& vocab);

}  // namespace mathrec::data
