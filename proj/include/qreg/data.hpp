#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "qreg/core.hpp"
#include "qreg/row_source.hpp"

namespace qreg {

/// Canonical-vector rows in geometrically growing column blocks.
struct SkewedSpec {
  Index n = 0;
  Index d = 0;
  /// Block growth ratio in (1, 2].
  double q = 2.0;
  double noise_ratio = 0.2;
  double corrupt_prob = 0.001;
  double corrupt_scale = 500.0;
  std::uint64_t seed = 0;
};

struct GaussianSpec {
  Index n = 0;
  Index d = 0;
  double noise_ratio = 0.2;
  double corrupt_prob = 0.001;
  double corrupt_scale = 500.0;
  std::uint64_t seed = 0;
};

struct Dataset {
  Design A;
  Vector b;
  Vector xstar;
};

/// c_1 = ceil(n (q-1) / (q^d - 1)), c_j = floor(c_1 q^(j-1)), remainder in the last block.
std::vector<Index> skewed_block_sizes(Index n, Index d, double q);
/// Smallest n giving c_1 >= 161.
Index skewed_min_rows(Index d, double q);

/// -sign(u - 1/2) ln(1 - 2 |u - 1/2|).
double laplace_from_uniform(double u);

/// b = A x* + eps with ||eps||_2 = noise_ratio ||A x*||_2; with probability corrupt_prob a row
/// instead gets b_i = corrupt_scale * eps_i.
Dataset generate_skewed(const SkewedSpec& spec);
Dataset generate_gaussian(const GaussianSpec& spec);

// ---------------------------------------------------------------- chunked files

struct ChunkInfo {
  Index begin = 0;
  Index end = 0;
  std::string a_path;
  std::uint32_t a_crc = 0;
  std::string b_path;
  std::uint32_t b_crc = 0;
};

/// Row-range chunks of (A, b) described by a text manifest.
class ChunkedDataset final : public ProblemSource {
 public:
  static ChunkedDataset open(const std::filesystem::path& manifest);

  Index rows() const override { return rows_; }
  Index cols() const override { return cols_; }
  bool sparse() const { return sparse_; }
  const std::vector<ChunkInfo>& chunks() const { return chunks_; }
  const std::filesystem::path& manifest() const { return manifest_; }

  /// Reads and checksums chunk k; errors name the chunk.
  std::pair<Design, Vector> load_chunk(std::size_t k) const;
  std::pair<Design, Vector> load_all() const;
  void for_each_block(const BlockFn& fn) const override;

 private:
  std::filesystem::path manifest_;
  Index rows_ = 0;
  Index cols_ = 0;
  bool sparse_ = false;
  std::vector<ChunkInfo> chunks_;
};

struct ChunkLayout {
  /// Rows per chunk; 0 derives it from chunk_values.
  Index chunk_rows = 0;
  Index chunk_values = Index(1) << 22;
};

/// Writes chunk files next to the manifest and returns the opened dataset.
ChunkedDataset save_chunked(const Design& A, const Vector& b, const std::filesystem::path& manifest,
                            const ChunkLayout& layout = {});
/// Manifest listing the chunks of `base` k times; no chunk data is copied.
ChunkedDataset replicate_stack(const ChunkedDataset& base, Index k, const std::filesystem::path& manifest);

/// One row per line: b_i followed by the row of A. A non-numeric first line is a header.
std::pair<Design, Vector> load_csv(const std::filesystem::path& path);
void save_csv(const std::filesystem::path& path, const Design& A, const Vector& b);

/// Opens a manifest or a CSV file, chosen by content.
std::pair<Design, Vector> load_problem_data(const std::filesystem::path& path);
bool is_manifest(const std::filesystem::path& path);

}  // namespace qreg
