#include "mousse/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace mousse {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'U', 'S', 'S', 'E', 'C', 'K'};

template <typename UInt>
void put_le(std::string& out, UInt value) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename UInt>
  UInt take_le() {
    need(sizeof(UInt));
    UInt value = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      value |= static_cast<UInt>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(UInt);
    return value;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("checkpoint: truncated data");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::put(const std::string& name, const Matrix& value) {
  if (name.empty()) throw ParameterError("checkpoint: empty section name");
  auto it = index_.find(name);
  if (it != index_.end()) {
    sections_[it->second].second = value;
    return;
  }
  index_.emplace(name, sections_.size());
  sections_.emplace_back(name, value);
}

void Checkpoint::put_vector(const std::string& name, const Vector& value) {
  put(name, Matrix(value.transpose()));
}

void Checkpoint::put_scalar(const std::string& name, double value) {
  put(name, Matrix::Constant(1, 1, value));
}

const Matrix& Checkpoint::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw IoError("checkpoint: missing section '" + name + "'");
  return sections_[it->second].second;
}

Vector Checkpoint::get_vector(const std::string& name) const {
  const Matrix& m = get(name);
  if (m.rows() != 1) throw IoError("checkpoint: section '" + name + "' is not a vector");
  return m.row(0).transpose();
}

double Checkpoint::get_scalar(const std::string& name) const {
  const Matrix& m = get(name);
  if (m.size() != 1) throw IoError("checkpoint: section '" + name + "' is not a scalar");
  return m(0, 0);
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  out.reserve(sections_.size());
  for (const auto& s : sections_) out.push_back(s.first);
  return out;
}

std::string Checkpoint::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(sections_.size()));
  for (const auto& [name, m] : sections_) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m(i, j)));
      }
    }
  }
  return out;
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw IoError("checkpoint: bad magic");
  }
  const auto version = in.take_le<std::uint32_t>();
  if (version != kVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = in.take_le<std::uint32_t>();
  Checkpoint ck;
  for (std::uint32_t s = 0; s < count; ++s) {
    const auto name_len = in.take_le<std::uint32_t>();
    std::string name(in.take(name_len));
    const auto rows = in.take_le<std::uint64_t>();
    const auto cols = in.take_le<std::uint64_t>();
    if (cols != 0 && rows > (bytes.size() / 8) / cols) throw IoError("checkpoint: truncated data");
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        m(i, j) = std::bit_cast<double>(in.take_le<std::uint64_t>());
      }
    }
    if (ck.contains(name)) throw IoError("checkpoint: duplicate section '" + name + "'");
    ck.put(name, m);
  }
  if (!in.done()) throw IoError("checkpoint: trailing bytes after last section");
  return ck;
}

void Checkpoint::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint Checkpoint::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint for reading: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace mousse
