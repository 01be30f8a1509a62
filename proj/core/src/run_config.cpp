#include "slotframes/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace slotframes {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename V>
void read(const json& j, const char* key, const std::string& where, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where + ": " + j.at(key).dump());
  }
}

// JSON numbers that must be non-negative integers.
void read_count(const json& j, const char* key, const std::string& where, std::size_t& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("'" + std::string(key) + "' in " + where + " must be a non-negative integer, got " + v.dump());
  }
  out = v.get<std::size_t>();
}

void read_counts(const json& j, const char* key, const std::string& where, std::vector<std::size_t>& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array()) throw ConfigError("'" + std::string(key) + "' in " + where + " must be an array");
  out.clear();
  for (const auto& e : v) {
    if (!e.is_number_integer() || e.get<long long>() < 0) {
      throw ConfigError("'" + std::string(key) + "' in " + where + " must hold non-negative integers");
    }
    out.push_back(e.get<std::size_t>());
  }
}

std::string scale_rule_name(AttnScaleRule r) { return r == AttnScaleRule::kInvSqrtSlots ? "inv_sqrt_K" : "inv_sqrt_D"; }

AttnScaleRule scale_rule_from(const std::string& s) {
  if (s == "inv_sqrt_K") return AttnScaleRule::kInvSqrtSlots;
  if (s == "inv_sqrt_D") return AttnScaleRule::kInvSqrtDim;
  throw ConfigError("unknown attn_scale '" + s + "' (expected inv_sqrt_K or inv_sqrt_D)");
}

std::string padding_name(Padding p) { return p == Padding::kZero ? "zero" : "circular"; }

Padding padding_from(const std::string& s) {
  if (s == "zero") return Padding::kZero;
  if (s == "circular") return Padding::kCircular;
  throw ConfigError("unknown padding '" + s + "' (expected zero or circular)");
}

std::string body_name(DecoderBody b) { return b == DecoderBody::kMlp ? "mlp" : "transpose_conv"; }

DecoderBody body_from(const std::string& s) {
  if (s == "mlp") return DecoderBody::kMlp;
  if (s == "transpose_conv") return DecoderBody::kTransposeConv;
  throw ConfigError("unknown decoder body '" + s + "' (expected mlp or transpose_conv)");
}

std::string frame_mode_name(FrameInitMode m) { return m == FrameInitMode::kLearned ? "learned" : "sampled"; }

FrameInitMode frame_mode_from(const std::string& s) {
  if (s == "learned") return FrameInitMode::kLearned;
  if (s == "sampled") return FrameInitMode::kSampled;
  throw ConfigError("unknown frame_init mode '" + s + "' (expected learned or sampled)");
}

void parse_model(const json& j, ModelConfig& m) {
  const std::string w = "model";
  check_keys(j, w,
             {"variant", "num_slots", "slot_dim", "attn_dim", "mlp_hidden", "iterations", "attn_scale",
              "append_frames", "decoder_only_rel", "stop_grad_frames", "mixed_abs_rel", "delta", "epsilon",
              "frame_init", "encoder", "decoder"});
  std::string s;
  if (j.contains("variant")) {
    read(j, "variant", w, s);
    m.variant.mode = variant_from_string(s);
  }
  read_count(j, "num_slots", w, m.num_slots);
  read_count(j, "slot_dim", w, m.slot_dim);
  read_count(j, "attn_dim", w, m.attn_dim);
  read_count(j, "mlp_hidden", w, m.mlp_hidden);
  read_count(j, "iterations", w, m.variant.iterations);
  if (j.contains("attn_scale")) {
    read(j, "attn_scale", w, s);
    m.variant.attn_scale = scale_rule_from(s);
  }
  read(j, "append_frames", w, m.variant.append_frames);
  read(j, "decoder_only_rel", w, m.variant.decoder_only_rel);
  read(j, "stop_grad_frames", w, m.variant.stop_grad_frames);
  read(j, "mixed_abs_rel", w, m.variant.mixed_abs_rel);
  read(j, "delta", w, m.grid.delta);
  read(j, "epsilon", w, m.grid.epsilon);
  if (j.contains("frame_init")) {
    const auto& f = j.at("frame_init");
    check_keys(f, "model.frame_init", {"mode", "identity_rotation"});
    if (f.contains("mode")) {
      read(f, "mode", "model.frame_init", s);
      m.frame_init.mode = frame_mode_from(s);
    }
    read(f, "identity_rotation", "model.frame_init", m.frame_init.identity_rotation);
  }
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    const std::string we = "model.encoder";
    check_keys(e, we, {"channels", "kernel", "strides", "padding"});
    read_count(e, "channels", we, m.encoder.channels);
    read_count(e, "kernel", we, m.encoder.kernel);
    read_counts(e, "strides", we, m.encoder.strides);
    if (e.contains("padding")) {
      read(e, "padding", we, s);
      m.encoder.padding = padding_from(s);
    }
  }
  if (j.contains("decoder")) {
    const auto& d = j.at("decoder");
    const std::string wd = "model.decoder";
    check_keys(d, wd, {"body", "hidden", "mlp_layers", "channels", "kernel", "strides"});
    if (d.contains("body")) {
      read(d, "body", wd, s);
      m.decoder.body = body_from(s);
    }
    read_count(d, "hidden", wd, m.decoder.hidden);
    read_count(d, "mlp_layers", wd, m.decoder.mlp_layers);
    read_count(d, "channels", wd, m.decoder.channels);
    read_count(d, "kernel", wd, m.decoder.kernel);
    read_counts(d, "strides", wd, m.decoder.strides);
  }
}

void parse_data(const json& j, DatasetSpec& d) {
  const std::string w = "data";
  check_keys(j, w,
             {"height", "width", "objects_per_scene", "block", "n_train", "n_val", "position_bias", "seed",
              "augment_translation"});
  read_count(j, "height", w, d.height);
  read_count(j, "width", w, d.width);
  read_count(j, "objects_per_scene", w, d.objects_per_scene);
  read_count(j, "block", w, d.block);
  read_count(j, "n_train", w, d.n_train);
  read_count(j, "n_val", w, d.n_val);
  if (j.contains("position_bias")) {
    std::string s;
    read(j, "position_bias", w, s);
    d.position_bias = position_bias_from_string(s);
  }
  if (j.contains("seed")) {
    std::size_t seed = 0;
    read_count(j, "seed", w, seed);
    d.seed = seed;
  }
  read(j, "augment_translation", w, d.augment_translation);
}

void parse_train(const json& j, TrainConfig& t) {
  const std::string w = "train";
  check_keys(j, w,
             {"lr_peak", "warmup_steps", "total_steps", "batch_size", "beta1", "beta2", "adam_eps", "eval_every",
              "checkpoint_every", "grad_clip", "threads"});
  read(j, "lr_peak", w, t.lr_peak);
  read_count(j, "warmup_steps", w, t.warmup_steps);
  read_count(j, "total_steps", w, t.total_steps);
  read_count(j, "batch_size", w, t.batch_size);
  read(j, "beta1", w, t.beta1);
  read(j, "beta2", w, t.beta2);
  read(j, "adam_eps", w, t.adam_eps);
  read_count(j, "eval_every", w, t.eval_every);
  read_count(j, "checkpoint_every", w, t.checkpoint_every);
  read(j, "grad_clip", w, t.grad_clip);
  read_count(j, "threads", w, t.threads);
}

json to_json(const RunConfig& c, bool with_paths) {
  const auto& m = c.model;
  json model{{"variant", to_string(m.variant.mode)},
             {"num_slots", m.num_slots},
             {"slot_dim", m.slot_dim},
             {"attn_dim", m.attn_dim},
             {"mlp_hidden", m.mlp_hidden},
             {"iterations", m.variant.iterations},
             {"attn_scale", scale_rule_name(m.variant.attn_scale)},
             {"append_frames", m.variant.append_frames},
             {"decoder_only_rel", m.variant.decoder_only_rel},
             {"stop_grad_frames", m.variant.stop_grad_frames},
             {"mixed_abs_rel", m.variant.mixed_abs_rel},
             {"delta", m.grid.delta},
             {"epsilon", m.grid.epsilon},
             {"frame_init",
              {{"mode", frame_mode_name(m.frame_init.mode)}, {"identity_rotation", m.frame_init.identity_rotation}}},
             {"encoder",
              {{"channels", m.encoder.channels},
               {"kernel", m.encoder.kernel},
               {"strides", m.encoder.strides},
               {"padding", padding_name(m.encoder.padding)}}},
             {"decoder",
              {{"body", body_name(m.decoder.body)},
               {"hidden", m.decoder.hidden},
               {"mlp_layers", m.decoder.mlp_layers},
               {"channels", m.decoder.channels},
               {"kernel", m.decoder.kernel},
               {"strides", m.decoder.strides}}}};
  const auto& d = c.data;
  json data{{"height", d.height},
            {"width", d.width},
            {"objects_per_scene", d.objects_per_scene},
            {"block", d.block},
            {"n_train", d.n_train},
            {"n_val", d.n_val},
            {"position_bias", to_string(d.position_bias)},
            {"seed", d.seed},
            {"augment_translation", d.augment_translation}};
  const auto& t = c.train;
  json train{{"lr_peak", t.lr_peak},
             {"warmup_steps", t.warmup_steps},
             {"total_steps", t.total_steps},
             {"batch_size", t.batch_size},
             {"beta1", t.beta1},
             {"beta2", t.beta2},
             {"adam_eps", t.adam_eps},
             {"eval_every", t.eval_every},
             {"checkpoint_every", t.checkpoint_every},
             {"grad_clip", t.grad_clip}};
  json out{{"seed", c.seed}, {"model", model}, {"data", data}, {"train", train}};
  if (with_paths) {
    out["train"]["threads"] = t.threads;
    out["paths"] = {{"data_dir", c.data_dir.string()}, {"out_dir", c.out_dir.string()}};
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  data.validate();
  train.validate();
  if (model.image_height != data.height || model.image_width != data.width) {
    throw ConfigError("model image size must equal the dataset canvas");
  }
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config", {"seed", "model", "data", "train", "paths"});
  RunConfig c;
  if (j.contains("seed")) {
    std::size_t seed = 0;
    read_count(j, "seed", "config", seed);
    c.seed = seed;
  }
  if (j.contains("model")) parse_model(j.at("model"), c.model);
  if (j.contains("data")) parse_data(j.at("data"), c.data);
  if (j.contains("train")) parse_train(j.at("train"), c.train);
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    check_keys(p, "paths", {"data_dir", "out_dir"});
    std::string s;
    if (p.contains("data_dir")) {
      read(p, "data_dir", "paths", s);
      c.data_dir = s;
    }
    if (p.contains("out_dir")) {
      read(p, "out_dir", "paths", s);
      c.out_dir = s;
    }
  }
  if (!base_dir.empty()) {
    if (c.data_dir.is_relative()) c.data_dir = (base_dir / c.data_dir).lexically_normal();
    if (c.out_dir.is_relative()) c.out_dir = (base_dir / c.out_dir).lexically_normal();
  }
  c.model.image_height = c.data.height;
  c.model.image_width = c.data.width;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), file.parent_path());
}

std::string run_config_to_json(const RunConfig& cfg) { return to_json(cfg, true).dump(2); }

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string text = to_json(cfg, false).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace slotframes
