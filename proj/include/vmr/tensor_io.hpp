#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vmr/error.hpp"
#include "vmr/nn/tensor.hpp"

namespace vmr::tensor_io {

// Container layout (little-endian):
//   "UTCM" | u32 version | u32 count |
//   count x { u32 name_len | name | u8 dtype | u32 rank | rank x u64 dim | data } |
//   u32 crc32 over everything before it
inline constexpr char kMagic[4] = {'U', 'T', 'C', 'M'};
inline constexpr std::uint32_t kVersion = 1;

enum class DType : std::uint8_t { kF64 = 0, kU8 = 1 };

struct Record {
  std::string name;
  DType dtype = DType::kF64;
  std::vector<std::uint64_t> dims;
  std::vector<double> f64;  // kF64 payload
  std::string bytes;        // kU8 payload

  bool operator==(const Record&) const = default;
};

Record matrix_record(std::string name, const nn::Matrix& m);
Record text_record(std::string name, std::string text);
nn::Matrix record_matrix(const Record& r);

class FormatError : public LoadError {
 public:
  enum class Kind { kBadMagic, kVersion, kTruncated, kChecksum, kShape, kMissing, kType };
  FormatError(Kind kind, std::string path, const std::string& what) : LoadError(std::move(path), what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string encode(const std::vector<Record>& records);
// `source` only labels errors.
std::vector<Record> decode(const std::string& bytes, const std::string& source = "<memory>");

void write_file(const std::filesystem::path& path, const std::vector<Record>& records);
std::vector<Record> read_file(const std::filesystem::path& path);

const Record& find(const std::vector<Record>& records, const std::string& name, const std::string& source);

// Parameter lists <-> records. Loading checks every name and shape.
std::vector<Record> param_records(const nn::ParamList& params);
void assign_params(nn::ParamList& params, const std::vector<Record>& records, const std::string& source);

}  // namespace vmr::tensor_io
