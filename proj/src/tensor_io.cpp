#include "vmr/tensor_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vmr::tensor_io {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end, std::string source) : data_(bytes), end_(end), source_(std::move(source)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void read_doubles(double* out, std::size_t n) {
    if (n > (end_ - pos_) / sizeof(double)) truncated();
    std::memcpy(out, data_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) truncated();
  }
  [[noreturn]] void truncated() const {
    throw FormatError(FormatError::Kind::kTruncated, source_, "checkpoint is truncated");
  }
  const std::string& data_;
  std::size_t end_;
  std::size_t pos_ = 0;
  std::string source_;
};

std::uint32_t crc_of(const std::string& bytes, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < n) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n - done, 1u << 30));
    c = crc32(c, reinterpret_cast<const Bytef*>(bytes.data() + done), chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(c);
}

std::string shape_text(const std::vector<std::uint64_t>& dims) {
  std::ostringstream s;
  s << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) s << (i ? "x" : "") << dims[i];
  s << ']';
  return s.str();
}

}  // namespace

Record matrix_record(std::string name, const nn::Matrix& m) {
  Record r;
  r.name = std::move(name);
  r.dtype = DType::kF64;
  r.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  r.f64.assign(m.data(), m.data() + m.size());
  return r;
}

Record text_record(std::string name, std::string text) {
  Record r;
  r.name = std::move(name);
  r.dtype = DType::kU8;
  r.dims = {text.size()};
  r.bytes = std::move(text);
  return r;
}

nn::Matrix record_matrix(const Record& r) {
  if (r.dtype != DType::kF64 || r.dims.size() != 2) {
    throw FormatError(FormatError::Kind::kType, r.name, "record is not a 2-D float64 tensor");
  }
  nn::Matrix m(static_cast<nn::Index>(r.dims[0]), static_cast<nn::Index>(r.dims[1]));
  std::memcpy(m.data(), r.f64.data(), r.f64.size() * sizeof(double));
  return m;
}

std::string encode(const std::vector<Record>& records) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out += r.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(r.dtype));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.dims.size()));
    std::uint64_t count = 1;
    for (auto d : r.dims) {
      put<std::uint64_t>(out, d);
      count *= d;
    }
    if (r.dtype == DType::kF64) {
      if (r.f64.size() != count) throw ContractError("record " + r.name + ": payload does not match its dims");
      out.append(reinterpret_cast<const char*>(r.f64.data()), r.f64.size() * sizeof(double));
    } else {
      if (r.bytes.size() != count) throw ContractError("record " + r.name + ": payload does not match its dims");
      out += r.bytes;
    }
  }
  put<std::uint32_t>(out, crc_of(out, out.size()));
  return out;
}

std::vector<Record> decode(const std::string& bytes, const std::string& source) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError(FormatError::Kind::kBadMagic, source, "bad magic, expected \"UTCM\"");
  }
  if (bytes.size() < 16) throw FormatError(FormatError::Kind::kTruncated, source, "checkpoint is truncated");
  const std::size_t body = bytes.size() - 4;
  Reader rd(bytes, body, source);
  rd.take(4);
  const auto version = rd.get<std::uint32_t>();
  if (version != kVersion) {
    throw FormatError(FormatError::Kind::kVersion, source,
                      "unsupported checkpoint version " + std::to_string(version) + " (expected " + std::to_string(kVersion) + ")");
  }
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  const auto count = rd.get<std::uint32_t>();
  std::vector<Record> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    Record r;
    r.name = rd.take(rd.get<std::uint32_t>());
    const auto tag = rd.get<std::uint8_t>();
    if (tag > 1) throw FormatError(FormatError::Kind::kType, source, "unknown dtype tag in record " + r.name);
    r.dtype = static_cast<DType>(tag);
    const auto rank = rd.get<std::uint32_t>();
    if (rank > 8) throw FormatError(FormatError::Kind::kType, source, "implausible rank in record " + r.name);
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      r.dims.push_back(rd.get<std::uint64_t>());
      if (r.dims.back() != 0 && n > (std::uint64_t{1} << 40) / r.dims.back()) {
        throw FormatError(FormatError::Kind::kTruncated, source, "record " + r.name + " claims more data than the file holds");
      }
      n *= r.dims.back();
    }
    if (r.dtype == DType::kF64) {
      if (n > bytes.size() / sizeof(double)) throw FormatError(FormatError::Kind::kTruncated, source, "checkpoint is truncated");
      r.f64.resize(n);
      rd.read_doubles(r.f64.data(), n);
    } else {
      r.bytes = rd.take(n);
    }
    out.push_back(std::move(r));
  }
  if (rd.pos() != body) throw FormatError(FormatError::Kind::kTruncated, source, "trailing bytes before checksum");
  if (crc_of(bytes, body) != stored) throw FormatError(FormatError::Kind::kChecksum, source, "checksum mismatch");
  return out;
}

void write_file(const std::filesystem::path& path, const std::vector<Record>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = encode(records);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw LoadError(tmp.string(), "cannot open for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw LoadError(tmp.string(), "write failed");
  }
  std::filesystem::rename(tmp, path);
}

std::vector<Record> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError(path.string(), "cannot open checkpoint");
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode(ss.str(), path.string());
}

const Record& find(const std::vector<Record>& records, const std::string& name, const std::string& source) {
  for (const auto& r : records) {
    if (r.name == name) return r;
  }
  throw FormatError(FormatError::Kind::kMissing, source, "missing tensor " + name);
}

std::vector<Record> param_records(const nn::ParamList& params) {
  std::vector<Record> out;
  for (const auto& p : params) out.push_back(matrix_record(p.name, p.tensor.value()));
  return out;
}

void assign_params(nn::ParamList& params, const std::vector<Record>& records, const std::string& source) {
  for (auto& p : params) {
    const Record& r = find(records, p.name, source);
    const std::vector<std::uint64_t> want = {static_cast<std::uint64_t>(p.tensor.rows()),
                                             static_cast<std::uint64_t>(p.tensor.cols())};
    if (r.dtype != DType::kF64 || r.dims != want) {
      throw FormatError(FormatError::Kind::kShape, source,
                        "shape mismatch for " + p.name + ": checkpoint " + shape_text(r.dims) + ", model " + shape_text(want));
    }
    p.tensor.mutable_value() = record_matrix(r);
  }
}

}  // namespace vmr::tensor_io
