#include "slotframes/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "slotframes/binary_io.hpp"

namespace slotframes {

using nlohmann::json;

namespace {

json spec_json(const DatasetSpec& s) {
  return json{{"height", s.height},
              {"width", s.width},
              {"objects_per_scene", s.objects_per_scene},
              {"block", s.block},
              {"n_train", s.n_train},
              {"n_val", s.n_val},
              {"position_bias", to_string(s.position_bias)},
              {"seed", s.seed},
              {"augment_translation", s.augment_translation}};
}

DatasetSpec spec_from_json(const json& j) {
  DatasetSpec s;
  s.height = j.at("height").get<std::size_t>();
  s.width = j.at("width").get<std::size_t>();
  s.objects_per_scene = j.at("objects_per_scene").get<std::size_t>();
  s.block = j.at("block").get<std::size_t>();
  s.n_train = j.at("n_train").get<std::size_t>();
  s.n_val = j.at("n_val").get<std::size_t>();
  s.position_bias = position_bias_from_string(j.at("position_bias").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
  s.augment_translation = j.at("augment_translation").get<bool>();
  return s;
}

}  // namespace

std::filesystem::path split_path(const std::filesystem::path& dir, Split split) {
  return dir / (to_string(split) + ".bin");
}

void write_split(const std::filesystem::path& file, const DatasetSpec& spec, Split split,
                 const std::vector<SceneSample>& scenes) {
  json objects = json::array();
  for (const auto& s : scenes) {
    json list = json::array();
    for (const auto& o : s.objects) {
      list.push_back(json{{"shape", o.shape_id},
                          {"color", o.color_id},
                          {"top", o.top},
                          {"left", o.left},
                          {"center_x", o.center_x},
                          {"center_y", o.center_y}});
    }
    objects.push_back(std::move(list));
  }
  const json header{{"spec", spec_json(spec)},
                    {"split", to_string(split)},
                    {"count", scenes.size()},
                    {"height", spec.height},
                    {"width", spec.width},
                    {"objects", std::move(objects)}};
  const std::string text = header.dump();

  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  out.write("SFDS", 4);
  write_le<std::uint32_t>(out, kDatasetVersion);
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& s : scenes) {
    if (s.image.shape() != Shape{spec.height, spec.width, 3}) throw DimensionError("scene image has the wrong shape");
    write_floats_le(out, s.image.ptr(), s.image.size());
  }
  for (const auto& s : scenes) {
    out.write(reinterpret_cast<const char*>(s.labels.data()), static_cast<std::streamsize>(s.labels.size()));
  }
  if (!out) throw Error("write to " + file.string() + " failed");
}

SplitFile read_split(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open dataset file " + file.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SFDS", 4) != 0) throw Error(file.string() + " is not a slotframes dataset file");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kDatasetVersion) {
    throw Error(file.string() + ": unsupported dataset version " + std::to_string(version));
  }
  const auto len = read_le<std::uint64_t>(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error(file.string() + ": truncated header");
  const json header = json::parse(text);

  SplitFile f;
  f.spec = spec_from_json(header.at("spec"));
  f.split = split_from_string(header.at("split").get<std::string>());
  const auto count = header.at("count").get<std::size_t>();
  const auto h = header.at("height").get<std::size_t>();
  const auto w = header.at("width").get<std::size_t>();
  const auto& objects = header.at("objects");
  f.scenes.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& s = f.scenes[i];
    s.image = Array<float>(Shape{h, w, 3});
    read_floats_le(in, s.image.ptr(), s.image.size());
    for (const auto& o : objects.at(i)) {
      s.objects.push_back(ObjectMeta{o.at("shape").get<std::size_t>(), o.at("color").get<std::size_t>(),
                                     o.at("top").get<std::size_t>(), o.at("left").get<std::size_t>(),
                                     o.at("center_x").get<double>(), o.at("center_y").get<double>()});
    }
  }
  for (auto& s : f.scenes) {
    s.labels.resize(h * w);
    in.read(reinterpret_cast<char*>(s.labels.data()), static_cast<std::streamsize>(h * w));
  }
  if (!in) throw Error(file.string() + ": truncated data blocks");
  return f;
}

}  // namespace slotframes
