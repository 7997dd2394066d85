#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "qreg/data.hpp"

namespace qreg {

static_assert(std::endian::native == std::endian::little, "chunk files are little-endian");

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kVersion = 1;

std::uint32_t crc_of(const std::string& bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

template <typename T>
void put(std::string& buf, T v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string where) : bytes_(bytes), where_(std::move(where)) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw DataError(where_ + ": truncated file");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void magic(const char* m) {
    if (bytes_.size() < 4 || bytes_.compare(0, 4, m) != 0) throw DataError(where_ + ": bad magic, expected " + m);
    pos_ = 4;
  }
  void finish() const {
    if (pos_ != bytes_.size()) throw DataError(where_ + ": trailing bytes");
  }

 private:
  const std::string& bytes_;
  std::string where_;
  std::size_t pos_ = 0;
};

std::string read_file(const fs::path& p, const std::string& where) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError(where + ": cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + p.string());
}

std::string encode_dense(const DenseMatrix& m) {
  std::string buf("QRDX");
  put<std::uint32_t>(buf, kVersion);
  put<std::uint64_t>(buf, static_cast<std::uint64_t>(m.rows()));
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(m.cols()));
  buf.append(reinterpret_cast<const char*>(m.data()), static_cast<size_t>(m.size()) * sizeof(double));
  return buf;
}

std::string encode_sparse(const SparseMatrix& m) {
  std::string buf("QRSX");
  put<std::uint32_t>(buf, kVersion);
  put<std::uint64_t>(buf, static_cast<std::uint64_t>(m.rows()));
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(m.cols()));
  put<std::uint64_t>(buf, static_cast<std::uint64_t>(m.nnz()));
  for (const Triple& t : m.entries()) {
    put<std::uint64_t>(buf, static_cast<std::uint64_t>(t.row));
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(t.col));
    put<double>(buf, t.value);
  }
  return buf;
}

Design decode(const std::string& bytes, const std::string& where) {
  Reader r(bytes, where);
  if (bytes.compare(0, 4, "QRSX") == 0) {
    r.magic("QRSX");
    if (r.get<std::uint32_t>() != kVersion) throw DataError(where + ": unsupported version");
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint32_t>();
    const auto nnz = r.get<std::uint64_t>();
    if (nnz > bytes.size()) throw DataError(where + ": truncated file");
    std::vector<Triple> e(static_cast<size_t>(nnz));
    for (Triple& t : e) {
      t.row = static_cast<std::int64_t>(r.get<std::uint64_t>());
      t.col = static_cast<std::int32_t>(r.get<std::uint32_t>());
      t.value = r.get<double>();
    }
    r.finish();
    try {
      return Design(SparseMatrix(static_cast<Index>(rows), static_cast<Index>(cols), std::move(e)));
    } catch (const InputError& err) {
      throw DataError(where + ": " + err.what());
    }
  }
  r.magic("QRDX");
  if (r.get<std::uint32_t>() != kVersion) throw DataError(where + ": unsupported version");
  const auto rows = r.get<std::uint64_t>();
  const auto cols = r.get<std::uint32_t>();
  const std::size_t header = 4 + 4 + 8 + 4;
  if (cols != 0 && rows > (bytes.size() - header) / sizeof(double) / cols) throw DataError(where + ": truncated file");
  if (bytes.size() != header + rows * cols * sizeof(double)) throw DataError(where + ": truncated file");
  DenseMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  std::memcpy(m.data(), bytes.data() + header, rows * cols * sizeof(double));
  try {
    return Design(std::move(m));
  } catch (const InputError& err) {
    throw DataError(where + ": " + err.what());
  }
}

std::string chunk_label(std::size_t k, const fs::path& p) {
  return "chunk " + std::to_string(k) + " (" + p.string() + ")";
}

void write_manifest(const fs::path& manifest, Index rows, Index cols, bool sparse,
                    const std::vector<ChunkInfo>& chunks) {
  std::ostringstream out;
  out << "qreg-manifest=1\n"
      << "rows=" << rows << "\n"
      << "cols=" << cols << "\n"
      << "format=" << (sparse ? "sparse" : "dense") << "\n";
  for (const ChunkInfo& c : chunks)
    out << "chunk=" << c.begin << ',' << c.end << ',' << c.a_path << ',' << c.a_crc << ',' << c.b_path << ','
        << c.b_crc << "\n";
  write_file(manifest, out.str());
}

}  // namespace

bool is_manifest(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  return in && std::getline(in, line) && line.rfind("qreg-manifest=", 0) == 0;
}

ChunkedDataset ChunkedDataset::open(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest " + manifest.string());
  ChunkedDataset ds;
  ds.manifest_ = manifest;
  std::string line;
  bool header = false;
  bool have_rows = false;
  bool have_cols = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("manifest line " + std::to_string(lineno) + ": missing '='");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    try {
      if (key == "qreg-manifest") {
        if (val != "1") throw DataError("manifest: unsupported version " + val);
        header = true;
      } else if (key == "rows") {
        ds.rows_ = std::stoll(val);
        have_rows = true;
      } else if (key == "cols") {
        ds.cols_ = std::stoll(val);
        have_cols = true;
      } else if (key == "format") {
        if (val != "dense" && val != "sparse") throw DataError("manifest: unknown format " + val);
        ds.sparse_ = val == "sparse";
      } else if (key == "chunk") {
        std::vector<std::string> f;
        std::stringstream ss(val);
        std::string part;
        while (std::getline(ss, part, ',')) f.push_back(part);
        if (f.size() != 6) throw DataError("expected 6 chunk fields");
        ChunkInfo c;
        c.begin = std::stoll(f[0]);
        c.end = std::stoll(f[1]);
        c.a_path = f[2];
        c.a_crc = static_cast<std::uint32_t>(std::stoul(f[3]));
        c.b_path = f[4];
        c.b_crc = static_cast<std::uint32_t>(std::stoul(f[5]));
        ds.chunks_.push_back(std::move(c));
      } else {
        throw DataError("unknown key " + key);
      }
    } catch (const DataError& e) {
      throw DataError("manifest line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::exception&) {
      throw DataError("manifest line " + std::to_string(lineno) + ": malformed value");
    }
  }
  if (!header || !have_rows || !have_cols) throw DataError("manifest " + manifest.string() + ": malformed header");
  Index at = 0;
  for (std::size_t k = 0; k < ds.chunks_.size(); ++k) {
    const ChunkInfo& c = ds.chunks_[k];
    if (c.begin != at || c.end <= c.begin)
      throw DataError("manifest: chunk " + std::to_string(k) + " row range does not continue the partition");
    at = c.end;
  }
  if (at != ds.rows_) throw DataError("manifest: chunk row ranges do not cover all rows");
  return ds;
}

std::pair<Design, Vector> ChunkedDataset::load_chunk(std::size_t k) const {
  if (k >= chunks_.size()) throw DataError("chunk " + std::to_string(k) + " does not exist");
  const ChunkInfo& c = chunks_[k];
  const fs::path dir = manifest_.parent_path();
  const fs::path ap = dir / c.a_path;
  const fs::path bp = dir / c.b_path;
  const std::string abytes = read_file(ap, chunk_label(k, ap));
  if (crc_of(abytes) != c.a_crc) throw DataError(chunk_label(k, ap) + ": checksum mismatch");
  const std::string bbytes = read_file(bp, chunk_label(k, bp));
  if (crc_of(bbytes) != c.b_crc) throw DataError(chunk_label(k, bp) + ": checksum mismatch");
  Design A = decode(abytes, chunk_label(k, ap));
  const Design B = decode(bbytes, chunk_label(k, bp));
  const Index rows = c.end - c.begin;
  if (A.rows() != rows || A.cols() != cols_ || A.is_sparse() != sparse_)
    throw DataError(chunk_label(k, ap) + ": shape does not match the manifest");
  if (B.is_sparse() || B.rows() != rows || B.cols() != 1)
    throw DataError(chunk_label(k, bp) + ": response shape does not match the manifest");
  Vector b = Eigen::Map<const Vector>(B.dense().data(), rows);
  return {std::move(A), std::move(b)};
}

void ChunkedDataset::for_each_block(const BlockFn& fn) const {
  for (std::size_t k = 0; k < chunks_.size(); ++k) {
    const auto [A, b] = load_chunk(k);
    fn(chunks_[k].begin, A, b);
  }
}

std::pair<Design, Vector> ChunkedDataset::load_all() const {
  std::vector<Design> blocks;
  Vector b(rows_);
  for (std::size_t k = 0; k < chunks_.size(); ++k) {
    auto [A, bk] = load_chunk(k);
    b.segment(chunks_[k].begin, bk.size()) = bk;
    blocks.push_back(std::move(A));
  }
  if (!sparse_) {
    DenseMatrix out(rows_, cols_);
    for (std::size_t k = 0; k < blocks.size(); ++k)
      out.middleRows(chunks_[k].begin, blocks[k].rows()) = blocks[k].dense();
    return {Design(std::move(out)), std::move(b)};
  }
  std::vector<Triple> entries;
  for (std::size_t k = 0; k < blocks.size(); ++k)
    for (const Triple& t : blocks[k].sparse().entries()) entries.push_back({t.row + chunks_[k].begin, t.col, t.value});
  return {Design(SparseMatrix(rows_, cols_, std::move(entries))), std::move(b)};
}

ChunkedDataset save_chunked(const Design& A, const Vector& b, const fs::path& manifest, const ChunkLayout& layout) {
  if (b.size() != A.rows()) throw InputError("save_chunked: b length does not match A rows");
  const Index n = A.rows();
  const Index d = A.cols();
  Index per = layout.chunk_rows;
  if (per <= 0) per = std::max<Index>(1, layout.chunk_values / std::max<Index>(1, d));
  const fs::path dir = manifest.parent_path().empty() ? fs::path(".") : manifest.parent_path();
  fs::create_directories(dir);
  const std::string stem = manifest.stem().string();
  std::vector<ChunkInfo> chunks;
  for (Index begin = 0, k = 0; begin < n; begin += per, ++k) {
    const Index end = std::min(n, begin + per);
    const Design block = row_block(A, begin, end);
    const std::string abytes = block.is_sparse() ? encode_sparse(block.sparse()) : encode_dense(block.dense());
    const std::string bbytes = encode_dense(DenseMatrix(b.segment(begin, end - begin)));
    ChunkInfo c;
    c.begin = begin;
    c.end = end;
    c.a_path = stem + ".A." + std::to_string(k) + ".bin";
    c.b_path = stem + ".b." + std::to_string(k) + ".bin";
    c.a_crc = crc_of(abytes);
    c.b_crc = crc_of(bbytes);
    write_file(dir / c.a_path, abytes);
    write_file(dir / c.b_path, bbytes);
    chunks.push_back(std::move(c));
  }
  write_manifest(manifest, n, d, A.is_sparse(), chunks);
  return ChunkedDataset::open(manifest);
}

ChunkedDataset replicate_stack(const ChunkedDataset& base, Index k, const fs::path& manifest) {
  if (k < 1) throw InputError("replicate_stack: k must be at least 1");
  const fs::path src_dir = fs::absolute(base.manifest()).parent_path();
  const fs::path dst_dir = fs::absolute(manifest).parent_path();
  fs::create_directories(dst_dir);
  const auto relocate = [&](const std::string& p) {
    const fs::path rel = fs::proximate(src_dir / p, dst_dir);
    return rel.generic_string();
  };
  std::vector<ChunkInfo> chunks;
  for (Index r = 0; r < k; ++r) {
    for (const ChunkInfo& c : base.chunks()) {
      ChunkInfo n = c;
      n.begin = c.begin + r * base.rows();
      n.end = c.end + r * base.rows();
      n.a_path = relocate(c.a_path);
      n.b_path = relocate(c.b_path);
      chunks.push_back(std::move(n));
    }
  }
  write_manifest(manifest, k * base.rows(), base.cols(), base.sparse(), chunks);
  return ChunkedDataset::open(manifest);
}

// ---------------------------------------------------------------- CSV

std::pair<Design, Vector> load_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        numeric = false;
        break;
      }
      vals.push_back(v);
    }
    if (!numeric) {
      if (rows.empty() && lineno == 1) continue;
      throw DataError(path.string() + " line " + std::to_string(lineno) + ": non-numeric value");
    }
    if (vals.size() < 2) throw DataError(path.string() + " line " + std::to_string(lineno) + ": need b and one column");
    if (!rows.empty() && vals.size() != rows.front().size())
      throw DataError(path.string() + " line " + std::to_string(lineno) + ": inconsistent column count");
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw DataError(path.string() + ": no data rows");
  const Index n = static_cast<Index>(rows.size());
  const Index d = static_cast<Index>(rows.front().size()) - 1;
  DenseMatrix A(n, d);
  Vector b(n);
  for (Index i = 0; i < n; ++i) {
    b(i) = rows[static_cast<size_t>(i)][0];
    for (Index j = 0; j < d; ++j) A(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j + 1)];
  }
  try {
    return {Design(std::move(A)), std::move(b)};
  } catch (const InputError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_csv(const fs::path& path, const Design& A, const Vector& b) {
  if (b.size() != A.rows()) throw InputError("save_csv: b length does not match A rows");
  const DenseMatrix m = A.to_dense();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    out << b(i);
    for (Index j = 0; j < m.cols(); ++j) out << ',' << m(i, j);
    out << '\n';
  }
}

std::pair<Design, Vector> load_problem_data(const fs::path& path) {
  if (is_manifest(path)) return ChunkedDataset::open(path).load_all();
  return load_csv(path);
}

}  // namespace qreg
