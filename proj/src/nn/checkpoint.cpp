#include "dsi/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace dsi::nn {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'I', '1'};

static_assert(std::endian::native == std::endian::little,
              "container format requires a little-endian host");

void write_u32_le(std::ostream& os, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

uint32_t read_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

nlohmann::json read_header(std::istream& is, const std::string& path,
                           uint64_t* data_start) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad magic at offset 0 in " + path);
  const uint32_t hlen = read_u32_le(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), hlen);
  if (!is) throw FormatError("truncated header at offset 8 in " + path);
  *data_start = 8 + hlen;
  try {
    return nlohmann::json::parse(hs);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("header parse error at offset " +
                      std::to_string(8 + e.byte) + " in " + path);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, Model<float>& model,
                     int64_t step, AdamW<float>* opt) {
  const ParamRefs<float> params = model.params();
  nlohmann::json header;
  header["version"] = 1;
  header["kind"] = "checkpoint";
  header["arch"] = model.spec().to_json();
  header["step"] = step;

  uint64_t offset = 0;
  nlohmann::json jp = nlohmann::json::array();
  for (auto* p : params) {
    jp.push_back({{"name", p->name},
                  {"shape", p->shape},
                  {"offset", offset},
                  {"nbytes", p->numel() * 4}});
    offset += static_cast<uint64_t>(p->numel()) * 4;
  }
  header["params"] = std::move(jp);
  if (opt) {
    header["optimizer"] = {{"config", opt->config().to_json()},
                           {"step", opt->step_count()},
                           {"moments_offset", offset}};
  } else {
    header["optimizer"] = nullptr;
  }

  const std::string hs = header.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os.write(kMagic, 4);
  write_u32_le(os, static_cast<uint32_t>(hs.size()));
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (auto* p : params)
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(p->numel() * 4));
  if (opt) {
    for (auto& m : opt->moments1())
      os.write(reinterpret_cast<const char*>(m.data()),
               static_cast<std::streamsize>(m.size() * 8));
    for (auto& v : opt->moments2())
      os.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * 8));
  }
  if (!os) throw FormatError("write failed: " + path);
}

CheckpointInfo read_checkpoint_info(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open for reading: " + path);
  uint64_t data_start = 0;
  const nlohmann::json header = read_header(is, path, &data_start);
  CheckpointInfo info;
  info.spec = ArchitectureSpec::from_json(header.at("arch"));
  info.step = header.at("step");
  info.has_optimizer = !header.at("optimizer").is_null();
  return info;
}

CheckpointInfo load_checkpoint(const std::string& path, Model<float>* model,
                               AdamW<float>* opt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open for reading: " + path);
  uint64_t data_start = 0;
  const nlohmann::json header = read_header(is, path, &data_start);

  CheckpointInfo info;
  info.spec = ArchitectureSpec::from_json(header.at("arch"));
  info.step = header.at("step");
  info.has_optimizer = !header.at("optimizer").is_null();
  model->init(info.spec, 0);

  const ParamRefs<float> params = model->params();
  const auto& jp = header.at("params");
  if (jp.size() != params.size())
    throw FormatError("parameter count mismatch in " + path);
  for (size_t i = 0; i < params.size(); ++i) {
    Param<float>* p = params[i];
    const auto& je = jp.at(i);
    if (je.at("name").get<std::string>() != p->name ||
        je.at("shape").get<std::vector<int64_t>>() != p->shape)
      throw FormatError("parameter layout mismatch for " + p->name + " in " +
                        path);
    is.seekg(static_cast<std::streamoff>(data_start +
                                         je.at("offset").get<uint64_t>()));
    is.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->numel() * 4));
    if (!is) throw FormatError("truncated parameter block in " + path);
  }

  if (opt) {
    if (!info.has_optimizer)
      throw FormatError("no optimizer state stored in " + path);
    const auto& jo = header.at("optimizer");
    opt->init(params, AdamW<float>::Config::from_json(jo.at("config")));
    opt->set_step_count(jo.at("step").get<int64_t>());
    is.seekg(static_cast<std::streamoff>(
        data_start + jo.at("moments_offset").get<uint64_t>()));
    for (auto& m : opt->moments1())
      is.read(reinterpret_cast<char*>(m.data()),
              static_cast<std::streamsize>(m.size() * 8));
    for (auto& v : opt->moments2())
      is.read(reinterpret_cast<char*>(v.data()),
              static_cast<std::streamsize>(v.size() * 8));
    if (!is) throw FormatError("truncated optimizer block in " + path);
  }
  return info;
}

}  // namespace dsi::nn
