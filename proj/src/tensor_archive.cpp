#include "inpaint_forge/tensor_archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "inpaint_forge/errors.hpp"

namespace inpaint_forge {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001B3ULL;
  }
  return state;
}

const torch::Tensor& TensorArchive::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw CorruptFileError("archive lacks tensor '" + name + "'");
  return it->second;
}

void TensorArchive::insert(std::string name, torch::Tensor tensor) {
  tensors_[std::move(name)] = std::move(tensor);
}

namespace {

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return "float32";
    case torch::kFloat64: return "float64";
    case torch::kInt64: return "int64";
    default: throw IoError("tensor archive: unsupported dtype " + std::string(c10::toString(t)));
  }
}

torch::ScalarType dtype_from_name(const std::string& name) {
  if (name == "float32") return torch::kFloat32;
  if (name == "float64") return torch::kFloat64;
  if (name == "int64") return torch::kInt64;
  throw CorruptFileError("tensor archive: unknown dtype '" + name + "'");
}

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

std::uint64_t get_u64(const std::string& in, std::size_t offset) {
  std::uint64_t v = 0;
  std::memcpy(&v, in.data() + offset, 8);
  return v;
}

}  // namespace

void write_tensor_archive(const std::filesystem::path& path, const nlohmann::json& meta,
                          const std::vector<NamedTensor>& tensors) {
  std::string payload;
  nlohmann::json index = nlohmann::json::array();
  for (const auto& [name, tensor] : tensors) {
    const torch::Tensor t = tensor.detach().to(torch::kCPU).contiguous();
    const auto nbytes = static_cast<std::size_t>(t.numel()) * t.element_size();
    index.push_back({{"name", name},
                     {"dtype", dtype_name(t.scalar_type())},
                     {"shape", t.sizes().vec()},
                     {"offset", payload.size()},
                     {"nbytes", nbytes}});
    payload.append(static_cast<const char*>(t.data_ptr()), nbytes);
  }
  const std::string header = nlohmann::json{{"meta", meta}, {"tensors", index}}.dump();

  std::string blob(kArchiveMagic);
  put_u64(blob, header.size());
  blob += header;
  blob += payload;
  put_u64(blob, fnv1a64(payload, fnv1a64(header)));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TensorArchive read_tensor_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFoundError("archive not found: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string blob = buffer.str();
  const std::string where = " (" + path.string() + ")";

  const std::size_t fixed = kArchiveMagic.size() + 16;
  if (blob.size() < fixed || std::string_view(blob).substr(0, kArchiveMagic.size()) != kArchiveMagic) {
    throw CorruptFileError("not a tensor archive" + where);
  }
  const std::uint64_t header_len = get_u64(blob, kArchiveMagic.size());
  const std::size_t header_start = kArchiveMagic.size() + 8;
  if (header_len > blob.size() - fixed) throw CorruptFileError("truncated archive header" + where);
  const std::size_t payload_start = header_start + header_len;
  const std::size_t payload_len = blob.size() - 8 - payload_start;

  const std::string_view header(blob.data() + header_start, header_len);
  const std::string_view payload(blob.data() + payload_start, payload_len);
  if (fnv1a64(payload, fnv1a64(header)) != get_u64(blob, blob.size() - 8)) {
    throw CorruptFileError("archive checksum mismatch" + where);
  }

  TensorArchive archive;
  try {
    const auto doc = nlohmann::json::parse(header);
    archive.meta = doc.at("meta");
    for (const auto& entry : doc.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto dtype = dtype_from_name(entry.at("dtype").get<std::string>());
      const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto nbytes = entry.at("nbytes").get<std::size_t>();
      torch::Tensor t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
      if (static_cast<std::size_t>(t.numel()) * t.element_size() != nbytes || offset > payload_len ||
          nbytes > payload_len - offset) {
        throw CorruptFileError("tensor '" + name + "' has an inconsistent extent" + where);
      }
      std::memcpy(t.data_ptr(), payload.data() + offset, nbytes);
      archive.insert(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(std::string("malformed archive header: ") + e.what() + where);
  }
  return archive;
}

}  // namespace inpaint_forge
