#pragma once

// Binary model container: a JSON manifest followed by raw arrays.
//
//   offset 0   8 bytes  magic "LIDSVDMC"
//          8   u32      container version
//         12   u32      reserved (0)
//         16   u64      manifest length in bytes
//         24   ...      manifest (UTF-8 JSON)
//          .   ...      array data, float64 little-endian, row-major
//
// The manifest lists every array as {name, rows, cols, offset, bytes} with
// offsets relative to the start of the data region, plus a "meta" object
// and an FNV-1a checksum of the data region.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lidsvd/error.hpp"
#include "lidsvd/linalg.hpp"

namespace lidsvd::container {

inline constexpr char kMagic[8] = {'L', 'I', 'D', 'S', 'V', 'D', 'M', 'C'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 24;

namespace detail {

inline std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class T>
T get_le(const char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

inline void put_double(std::string& out, double x) { put_le(out, std::bit_cast<std::uint64_t>(x)); }
inline double get_double(const char* p) { return std::bit_cast<double>(get_le<std::uint64_t>(p)); }

}  // namespace detail

class ModelContainer {
 public:
  nlohmann::json meta = nlohmann::json::object();

  void put(const std::string& name, const RowMatrix& array) { arrays_[name] = array; }
  void put(const std::string& name, const Vector& v) { arrays_[name] = RowMatrix(v.transpose()); }
  void put(const std::string& name, const std::vector<int>& v) {
    RowMatrix row(1, static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = v[i];
    arrays_[name] = row;
  }

  bool has(const std::string& name) const { return arrays_.count(name) != 0; }

  const RowMatrix& get(const std::string& name) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw Error(Errc::container_integrity, "missing array '" + name + "'");
    return it->second;
  }

  /// Fetches an array and checks its shape; -1 accepts any extent.
  const RowMatrix& get(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
    const RowMatrix& a = get(name);
    if ((rows >= 0 && a.rows() != rows) || (cols >= 0 && a.cols() != cols))
      throw Error(Errc::shape_mismatch, "array '" + name + "' is " + std::to_string(a.rows()) + "x" +
                                            std::to_string(a.cols()) + ", expected " + std::to_string(rows) +
                                            "x" + std::to_string(cols));
    return a;
  }

  Vector get_vector(const std::string& name, Eigen::Index length = -1) const {
    const RowMatrix& a = get(name, 1, length);
    return a.row(0).transpose();
  }

  std::vector<int> get_ints(const std::string& name, Eigen::Index length = -1) const {
    const RowMatrix& a = get(name, 1, length);
    std::vector<int> out(static_cast<std::size_t>(a.cols()));
    for (Eigen::Index i = 0; i < a.cols(); ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(a(0, i));
    return out;
  }

  std::vector<std::string> array_names() const {
    std::vector<std::string> names;
    for (const auto& [name, _] : arrays_) names.push_back(name);
    return names;
  }

  std::string serialize() const {
    std::string data;
    nlohmann::json index = nlohmann::json::array();
    for (const auto& [name, a] : arrays_) {
      const std::size_t offset = data.size();
      for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c) detail::put_double(data, a(r, c));
      index.push_back({{"name", name},
                       {"rows", a.rows()},
                       {"cols", a.cols()},
                       {"offset", offset},
                       {"bytes", data.size() - offset}});
    }
    nlohmann::json manifest;
    manifest["format_version"] = kVersion;
    manifest["arrays"] = std::move(index);
    manifest["meta"] = meta;
    manifest["data_bytes"] = data.size();
    manifest["data_fnv1a"] = detail::fnv1a(data.data(), data.size());
    const std::string text = manifest.dump(1);

    std::string out(kMagic, sizeof kMagic);
    detail::put_le<std::uint32_t>(out, kVersion);
    detail::put_le<std::uint32_t>(out, 0);
    detail::put_le<std::uint64_t>(out, text.size());
    out += text;
    out += data;
    return out;
  }

  static ModelContainer deserialize(const std::string& bytes) {
    const auto integrity = [](const std::string& why) { return Error(Errc::container_integrity, why); };
    if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
      throw integrity("not a model container (bad magic or truncated header)");
    const auto version = detail::get_le<std::uint32_t>(bytes.data() + 8);
    if (version != kVersion)
      throw Error(Errc::version_mismatch, "container version " + std::to_string(version) + ", expected " +
                                              std::to_string(kVersion));
    const auto manifest_len = detail::get_le<std::uint64_t>(bytes.data() + 16);
    if (manifest_len > bytes.size() - kHeaderBytes) throw integrity("truncated manifest");

    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(bytes.begin() + kHeaderBytes,
                                       bytes.begin() + static_cast<std::ptrdiff_t>(kHeaderBytes + manifest_len));
    } catch (const nlohmann::json::exception& e) {
      throw integrity(std::string("unreadable manifest: ") + e.what());
    }

    ModelContainer out;
    try {
      if (manifest.at("format_version").get<std::uint32_t>() != kVersion)
        throw Error(Errc::version_mismatch, "manifest format version " + manifest.at("format_version").dump());
      const std::size_t data_start = kHeaderBytes + manifest_len;
      const auto data_bytes = manifest.at("data_bytes").get<std::uint64_t>();
      if (bytes.size() - data_start != data_bytes)
        throw integrity("data region holds " + std::to_string(bytes.size() - data_start) + " bytes, manifest says " +
                        std::to_string(data_bytes) + " (truncated or padded file)");
      const char* data = bytes.data() + data_start;
      if (detail::fnv1a(data, data_bytes) != manifest.at("data_fnv1a").get<std::uint64_t>())
        throw integrity("data checksum mismatch");
      out.meta = manifest.at("meta");
      for (const auto& entry : manifest.at("arrays")) {
        const auto name = entry.at("name").get<std::string>();
        const auto rows = entry.at("rows").get<std::int64_t>();
        const auto cols = entry.at("cols").get<std::int64_t>();
        const auto offset = entry.at("offset").get<std::uint64_t>();
        const auto nbytes = entry.at("bytes").get<std::uint64_t>();
        if (rows < 0 || cols < 0 || static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols) * 8 != nbytes)
          throw Error(Errc::shape_mismatch, "array '" + name + "' declares " + std::to_string(rows) + "x" +
                                                std::to_string(cols) + " but stores " + std::to_string(nbytes) +
                                                " bytes");
        if (offset > data_bytes || nbytes > data_bytes - offset)
          throw integrity("array '" + name + "' extends past the data region");
        RowMatrix a(rows, cols);
        const char* p = data + offset;
        for (Eigen::Index r = 0; r < a.rows(); ++r)
          for (Eigen::Index c = 0; c < a.cols(); ++c, p += 8) a(r, c) = detail::get_double(p);
        out.arrays_[name] = std::move(a);
      }
    } catch (const nlohmann::json::exception& e) {
      throw integrity(std::string("malformed manifest: ") + e.what());
    }
    return out;
  }

  void save(const std::filesystem::path& path) const {
    const std::string bytes = serialize();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(Errc::io_failure, "cannot write " + path.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error(Errc::io_failure, "short write to " + path.string());
  }

  static ModelContainer load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      if (!std::filesystem::exists(path)) throw Error(Errc::file_not_found, "not found: " + path.string());
      throw Error(Errc::io_failure, "cannot open " + path.string());
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
  }

 private:
  std::map<std::string, RowMatrix> arrays_;
};

}  // namespace lidsvd::container
