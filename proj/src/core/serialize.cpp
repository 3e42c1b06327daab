#include <bit>
#include <cstring>
#include <fstream>

#include "dsi/core/ops.hpp"

namespace dsi::core {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'I', '1'};

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
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

// Tensor blocks are written little-endian; this code assumes an LE host.
static_assert(std::endian::native == std::endian::little,
              "container format requires a little-endian host");

}  // namespace

void save_dataset(const Dataset& d, const std::string& path) {
  d.check_invariants();
  nlohmann::json header;
  header["version"] = 1;
  header["label_kind"] =
      d.label_kind == LabelKind::kDiscrete ? "discrete" : "continuous";
  if (d.pad_length)
    header["pad_length"] = *d.pad_length;
  else
    header["pad_length"] = nullptr;
  header["manifest"] = d.manifest;
  if (!d.episodes.empty()) {
    const auto& f = d.episodes.front().frames;
    header["frame_shape"] = {f.h, f.w, f.c};
  } else {
    header["frame_shape"] = {0, 0, 0};
  }

  uint64_t offset = 0;
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& e : d.episodes) {
    nlohmann::json je;
    je["t"] = e.frames.t;
    je["return_label"] = e.return_label;
    je["policy_id"] = e.policy_id;
    je["gamma"] = e.gamma;
    je["seed"] = e.seed;
    nlohmann::json jevents = nlohmann::json::array();
    for (const auto& ev : e.events)
      jevents.push_back({ev.time_index, event_kind_name(ev.kind)});
    je["events"] = jevents;
    je["offset"] = offset;
    const uint64_t nbytes = e.frames.data.size() + e.rewards.size() * 4 +
                            e.validity.size();
    je["nbytes"] = nbytes;
    offset += nbytes;
    eps.push_back(std::move(je));
  }
  header["episodes"] = std::move(eps);

  const std::string hs = header.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os.write(kMagic, 4);
  write_u32_le(os, static_cast<uint32_t>(hs.size()));
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& e : d.episodes) {
    os.write(reinterpret_cast<const char*>(e.frames.data.data()),
             static_cast<std::streamsize>(e.frames.data.size()));
    os.write(reinterpret_cast<const char*>(e.rewards.data()),
             static_cast<std::streamsize>(e.rewards.size() * 4));
    os.write(reinterpret_cast<const char*>(e.validity.data()),
             static_cast<std::streamsize>(e.validity.size()));
  }
  if (!os) throw FormatError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open for reading: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad magic at offset 0 in " + path);
  const uint32_t hlen = read_u32_le(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), hlen);
  if (!is) throw FormatError("truncated header at offset 8 in " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("header parse error at offset " +
                      std::to_string(8 + e.byte) + " in " + path);
  }

  Dataset d;
  d.label_kind = header.at("label_kind").get<std::string>() == "discrete"
                     ? LabelKind::kDiscrete
                     : LabelKind::kContinuous;
  if (!header.at("pad_length").is_null())
    d.pad_length = header.at("pad_length").get<int>();
  d.manifest = header.at("manifest");
  const auto shape = header.at("frame_shape");
  const int64_t h = shape.at(0), w = shape.at(1), c = shape.at(2);

  const uint64_t data_start = 8 + hlen;
  for (const auto& je : header.at("episodes")) {
    Episode e;
    e.frames.t = je.at("t").get<int64_t>();
    e.frames.h = h;
    e.frames.w = w;
    e.frames.c = c;
    e.return_label = je.at("return_label").get<float>();
    e.policy_id = je.at("policy_id").get<int>();
    e.gamma = je.at("gamma").get<float>();
    e.seed = je.at("seed").get<uint64_t>();
    for (const auto& jev : je.at("events")) {
      e.events.push_back(
          {jev.at(0).get<int>(), event_kind_from_name(jev.at(1))});
    }
    const uint64_t offset = je.at("offset").get<uint64_t>();
    const uint64_t nbytes = je.at("nbytes").get<uint64_t>();
    const int64_t t = e.frames.t;
    const uint64_t expect = static_cast<uint64_t>(t) * (h * w * c + 5);
    if (nbytes != expect)
      throw FormatError("episode block size mismatch at offset " +
                        std::to_string(data_start + offset) + " in " + path);
    is.seekg(static_cast<std::streamoff>(data_start + offset));
    e.frames.data.resize(t * h * w * c);
    is.read(reinterpret_cast<char*>(e.frames.data.data()),
            static_cast<std::streamsize>(e.frames.data.size()));
    e.rewards.resize(t);
    is.read(reinterpret_cast<char*>(e.rewards.data()),
            static_cast<std::streamsize>(t * 4));
    e.validity.resize(t);
    is.read(reinterpret_cast<char*>(e.validity.data()),
            static_cast<std::streamsize>(t));
    if (!is)
      throw FormatError("truncated episode block at offset " +
                        std::to_string(data_start + offset) + " in " + path);
    d.episodes.push_back(std::move(e));
  }
  d.check_invariants();
  return d;
}

}  // namespace dsi::core
