#include "slotframes/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

#include "slotframes/binary_io.hpp"
#include "slotframes/run_config.hpp"

namespace slotframes {

using nlohmann::json;

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ck) {
  json table = json::array();
  std::uint64_t offset = 0;
  auto add = [&](const std::string& name, const std::string& role, const Array<float>& a) {
    table.push_back(json{{"name", name},
                         {"role", role},
                         {"shape", a.shape()},
                         {"dtype", "float32"},
                         {"offset", offset},
                         {"count", a.size()}});
    offset += a.size() * sizeof(float);
  };
  const auto& entries = ck.params.entries();
  const bool with_moments = ck.adam.m.size() == entries.size();
  for (const auto& [name, value] : entries) add(name, "param", value);
  if (with_moments) {
    for (std::size_t i = 0; i < entries.size(); ++i) add(entries[i].first, "adam_m", ck.adam.m[i]);
    for (std::size_t i = 0; i < entries.size(); ++i) add(entries[i].first, "adam_v", ck.adam.v[i]);
  }
  json config = ck.config_json.empty() ? json::object() : json::parse(ck.config_json);
  const json manifest{{"step", ck.step},
                      {"seed", ck.seed},
                      {"config_hash", hash_hex(ck.config_hash)},
                      {"config", config},
                      {"adam_t", ck.adam.t},
                      {"rng", {{"kind", "counter"}, {"seed", ck.seed}, {"step", ck.step}}},
                      {"tensors", table}};
  const std::string text = manifest.dump();

  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write("SFCK", 4);
    write_le<std::uint32_t>(out, kCheckpointVersion);
    write_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, value] : entries) write_floats_le(out, value.ptr(), value.size());
    if (with_moments) {
      for (const auto& m : ck.adam.m) write_floats_le(out, m.ptr(), m.size());
      for (const auto& v : ck.adam.v) write_floats_le(out, v.ptr(), v.size());
    }
    if (!out) throw Error("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + file.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SFCK", 4) != 0) throw Error(file.string() + " is not a slotframes checkpoint");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error(file.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = read_le<std::uint64_t>(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error(file.string() + ": truncated manifest");
  const json manifest = json::parse(text);

  Checkpoint ck;
  ck.step = manifest.at("step").get<std::uint64_t>();
  ck.seed = manifest.at("seed").get<std::uint64_t>();
  ck.config_hash = std::stoull(manifest.at("config_hash").get<std::string>(), nullptr, 16);
  ck.config_json = manifest.at("config").dump();
  ck.adam.t = manifest.at("adam_t").get<std::uint64_t>();
  const auto data_start = in.tellg();
  for (const auto& t : manifest.at("tensors")) {
    if (t.at("dtype").get<std::string>() != "float32") throw Error(file.string() + ": unsupported dtype");
    Array<float> a(t.at("shape").get<Shape>());
    in.seekg(data_start + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
    read_floats_le(in, a.ptr(), a.size());
    const auto role = t.at("role").get<std::string>();
    if (role == "param") {
      ck.params.add(t.at("name").get<std::string>(), std::move(a));
    } else if (role == "adam_m") {
      ck.adam.m.push_back(std::move(a));
    } else if (role == "adam_v") {
      ck.adam.v.push_back(std::move(a));
    } else {
      throw Error(file.string() + ": unknown tensor role '" + role + "'");
    }
  }
  if (ck.adam.m.empty()) ck.adam = [&] {
    auto s = make_adam_state(ck.params);
    s.t = ck.adam.t;
    return s;
  }();
  return ck;
}

std::uint64_t file_hash(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open " + file.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace slotframes
