#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "slotframes/grad_check.hpp"
#include "slotframes/model.hpp"
#include "slotframes/verify.hpp"
#include "verify_util.hpp"

namespace slotframes::verify {

namespace {

using TensorD = Tensor<double>;
using Fn = std::function<TensorD(const TensorD&)>;

struct GradCase {
  Array<double> x;
  Fn fn;
};

using CaseFactory = std::function<GradCase(Rng&)>;

constexpr double kEps = 1e-4;
// The composed model is piecewise smooth (ReLU, clamps); a smaller step keeps
// central differences from straddling a kink.
constexpr double kComposedEps = 1e-6;
constexpr double kTol = 1e-3;
constexpr std::size_t kInstances = 100;

// Loss = sum(fn(x) * w) with a fixed random w, so every output element
// contributes a distinct weight.
PropertyResult check_cases(const std::string& name, std::size_t instances, std::uint64_t seed,
                           const CaseFactory& make) {
  PropertyResult r;
  r.name = "grad/" + name;
  r.tolerance = kTol;
  r.passed = true;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    Rng rng(derive_seed(seed, i));
    GradCase c = make(rng);
    const auto probe = c.fn(TensorD::constant(c.x));
    const auto w = TensorD::constant(random_normal(probe.shape(), rng));
    const auto report = grad_check([&](const TensorD& t) { return sum(mul(c.fn(t), w)); }, c.x, kEps, kTol);
    r.measured = std::max(r.measured, report.finite ? report.max_rel_error : INFINITY);
    if (!report.passed) {
      ++failures;
      if (r.passed) {
        std::ostringstream os;
        os << "instance " << i << ": " << report.diagnostic << " (index " << report.worst_index << ", analytic "
           << report.worst_analytic << ", numeric " << report.worst_numeric << ")";
        r.detail = os.str();
      }
      r.passed = false;
    }
  }
  if (r.passed) {
    r.detail = std::to_string(instances) + " instances";
  } else {
    r.detail = std::to_string(failures) + "/" + std::to_string(instances) + " failed; first " + r.detail;
  }
  return r;
}

std::vector<TensorD> unpack(const TensorD& x, const std::vector<Shape>& shapes) {
  std::vector<TensorD> out;
  std::size_t off = 0;
  for (const auto& s : shapes) {
    out.push_back(reshape(slice(x, 0, off, numel(s)), s));
    off += numel(s);
  }
  return out;
}

Array<double> pack(const std::vector<Array<double>>& parts) {
  std::size_t n = 0;
  for (const auto& p : parts) n += p.size();
  Array<double> out(Shape{n});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.ptr(), p.ptr() + p.size(), out.ptr() + off);
    off += p.size();
  }
  return out;
}

// Binary op over a randomly chosen broadcast pattern.
CaseFactory binary_case(TensorD (*op)(const TensorD&, const TensorD&), bool positive_b) {
  return [op, positive_b](Rng& rng) {
    static const std::vector<std::pair<Shape, Shape>> patterns = {
        {{3, 4}, {3, 4}}, {{2, 3, 4}, {4}}, {{2, 3, 4}, {3, 1}}, {{3, 1}, {1, 4}}, {{4}, {2, 3, 4}}};
    const auto& [sa, sb] = patterns[rng.below(patterns.size())];
    auto a = random_uniform(sa, rng, -1.0, 1.0);
    auto b = positive_b ? random_signed_away(sb, rng, 0.5, 2.0) : random_uniform(sb, rng, -1.0, 1.0);
    return GradCase{pack({a, b}), [op, sa, sb](const TensorD& x) {
                      auto p = unpack(x, {sa, sb});
                      return op(p[0], p[1]);
                    }};
  };
}

CaseFactory unary_case(Fn op, double lo, double hi, double kink = NAN) {
  return [op, lo, hi, kink](Rng& rng) {
    Array<double> x(Shape{3, 5});
    for (std::size_t i = 0; i < x.size(); ++i) {
      double v;
      do {
        v = rng.uniform(lo, hi);
      } while (!std::isnan(kink) && std::abs(v - kink) < 1e-2);
      x[i] = v;
    }
    return GradCase{x, op};
  };
}

// Symmetric 2x2 covariances [K,3] whose principal axis stays clear of the
// +-45 degree branch cut of the post-processed rotation.
Array<double> random_covariances(std::size_t k, Rng& rng) {
  Array<double> cov(Shape{k, 3});
  for (std::size_t s = 0; s < k; ++s) {
    double theta;
    do {
      theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
    } while (distance_to_branch_cut(theta) < 3.0 * std::numbers::pi / 180.0);
    const double l2 = rng.uniform(0.01, 0.5);
    const double l1 = l2 + rng.uniform(0.05, 0.5);
    const double c = std::cos(theta), sn = std::sin(theta);
    cov[s * 3] = l1 * c * c + l2 * sn * sn;
    cov[s * 3 + 1] = (l1 - l2) * c * sn;
    cov[s * 3 + 2] = l1 * sn * sn + l2 * c * c;
  }
  return cov;
}

// Attention [K,N] from logits, renormalized over tokens.
TensorD mask_from_logits(const TensorD& logits) {
  const auto a = softmax(logits, 0);
  return div(a, sum_axis(a, 1, true));
}

std::vector<PropertyResult> op_checks() {
  std::vector<PropertyResult> out;
  std::uint64_t seed = 100;
  auto add_check = [&](const std::string& name, const CaseFactory& f, std::size_t n = kInstances) {
    out.push_back(check_cases(name, n, ++seed, f));
  };

  add_check("add", binary_case(&add<double>, false));
  add_check("sub", binary_case(&sub<double>, false));
  add_check("mul", binary_case(&mul<double>, false));
  add_check("div", binary_case(&div<double>, true));
  add_check("add_scalar", unary_case([](const TensorD& x) { return add_scalar(x, 0.7); }, -2, 2));
  add_check("mul_scalar", unary_case([](const TensorD& x) { return mul_scalar(x, -1.3); }, -2, 2));
  add_check("neg", unary_case([](const TensorD& x) { return neg(x); }, -2, 2));
  add_check("relu", unary_case([](const TensorD& x) { return relu(x); }, -2, 2, 0.0));
  add_check("sigmoid", unary_case([](const TensorD& x) { return sigmoid(x); }, -6, 6));
  add_check("tanh", unary_case([](const TensorD& x) { return tanh(x); }, -3, 3));
  add_check("exp", unary_case([](const TensorD& x) { return exp(x); }, -3, 2));
  add_check("sqrt", unary_case([](const TensorD& x) { return sqrt(x); }, 0.2, 3));
  add_check("square", unary_case([](const TensorD& x) { return square(x); }, -2, 2));
  add_check("sin", unary_case([](const TensorD& x) { return sin(x); }, -4, 4));
  add_check("cos", unary_case([](const TensorD& x) { return cos(x); }, -4, 4));
  add_check("clamp_min", unary_case([](const TensorD& x) { return clamp_min(x, 0.1); }, -1, 1, 0.1));
  add_check("sum", unary_case([](const TensorD& x) { return sum(x); }, -1, 1));
  add_check("mean", unary_case([](const TensorD& x) { return mean(x); }, -1, 1));

  add_check("sum_axis", [](Rng& rng) {
    const Shape s{2, 3, 4};
    const std::size_t axis = rng.below(3);
    const bool keep = rng.below(2) == 1;
    return GradCase{random_uniform(s, rng, -1, 1), [axis, keep](const TensorD& x) { return sum_axis(x, axis, keep); }};
  });
  add_check("reshape", [](Rng& rng) {
    return GradCase{random_uniform(Shape{2, 6}, rng, -1, 1), [](const TensorD& x) { return reshape(x, Shape{3, 4}); }};
  });
  add_check("broadcast_to", [](Rng& rng) {
    return GradCase{random_uniform(Shape{3, 1}, rng, -1, 1),
                    [](const TensorD& x) { return broadcast_to(x, Shape{2, 3, 4}); }};
  });
  add_check("concat", [](Rng& rng) {
    const std::size_t axis = rng.below(2);
    const Shape sa = axis == 0 ? Shape{2, 3} : Shape{3, 2};
    const Shape sb = axis == 0 ? Shape{1, 3} : Shape{3, 1};
    const Shape sc = axis == 0 ? Shape{3, 3} : Shape{3, 3};
    auto x = pack({random_uniform(sa, rng, -1, 1), random_uniform(sb, rng, -1, 1), random_uniform(sc, rng, -1, 1)});
    return GradCase{x, [=](const TensorD& t) {
                      auto p = unpack(t, {sa, sb, sc});
                      return concat<double>({p[0], p[1], p[2]}, axis);
                    }};
  });
  add_check("slice", [](Rng& rng) {
    const std::size_t axis = rng.below(3);
    const std::size_t start = rng.below(2);
    return GradCase{random_uniform(Shape{3, 3, 3}, rng, -1, 1),
                    [=](const TensorD& x) { return slice(x, axis, start, 2); }};
  });
  add_check("transpose", [](Rng& rng) {
    const bool batched = rng.below(2) == 1;
    const Shape s = batched ? Shape{2, 3, 4} : Shape{3, 4};
    return GradCase{random_uniform(s, rng, -1, 1), [](const TensorD& x) { return transpose(x); }};
  });
  add_check("select_rows", [](Rng& rng) {
    const Shape s{4, 3};
    std::vector<bool> mask(4);
    for (std::size_t i = 0; i < 4; ++i) mask[i] = rng.below(2) == 1;
    auto x = pack({random_uniform(s, rng, -1, 1), random_uniform(s, rng, -1, 1)});
    return GradCase{x, [=](const TensorD& t) {
                      auto p = unpack(t, {s, s});
                      return select_rows(mask, p[0], p[1]);
                    }};
  });
  add_check("matmul", [](Rng& rng) {
    const std::size_t m = 1 + rng.below(7), k = 1 + rng.below(9), n = 1 + rng.below(7);
    const Shape sa{m, k}, sb{k, n};
    auto x = pack({random_uniform(sa, rng, -1, 1), random_uniform(sb, rng, -1, 1)});
    return GradCase{x, [=](const TensorD& t) {
                      auto p = unpack(t, {sa, sb});
                      return matmul(p[0], p[1]);
                    }};
  });
  add_check("bmm", [](Rng& rng) {
    const std::size_t b = 1 + rng.below(3), m = 1 + rng.below(5), k = 1 + rng.below(6), n = 1 + rng.below(5);
    const Shape sa{b, m, k}, sb{b, k, n};
    auto x = pack({random_uniform(sa, rng, -1, 1), random_uniform(sb, rng, -1, 1)});
    return GradCase{x, [=](const TensorD& t) {
                      auto p = unpack(t, {sa, sb});
                      return bmm(p[0], p[1]);
                    }};
  });
  add_check("linear", [](Rng& rng) {
    const Shape sx{2, 3, 4}, sw{4, 5}, sb{5};
    auto x = pack({random_uniform(sx, rng, -1, 1), random_uniform(sw, rng, -1, 1), random_uniform(sb, rng, -1, 1)});
    return GradCase{x, [=](const TensorD& t) {
                      auto p = unpack(t, {sx, sw, sb});
                      return linear(p[0], p[1], p[2]);
                    }};
  });
  add_check("layer_norm", [](Rng& rng) {
    const Shape sx{3, 6}, sg{6};
    auto x = pack({random_uniform(sx, rng, -2, 2), random_uniform(sg, rng, 0.5, 1.5), random_uniform(sg, rng, -1, 1)});
    return GradCase{x, [=](const TensorD& t) {
                      auto p = unpack(t, {sx, sg, sg});
                      return layer_norm(p[0], p[1], p[2]);
                    }};
  });
  add_check("softmax", [](Rng& rng) {
    const std::size_t axis = rng.below(3);
    return GradCase{random_uniform(Shape{3, 4, 2}, rng, -3, 3),
                    [axis](const TensorD& x) { return softmax(x, axis); }};
  });
  add_check("conv2d_same", [](Rng& rng) {
    const std::size_t h = 3 + rng.below(4), w = 3 + rng.below(4), cin = 1 + rng.below(3), cout = 1 + rng.below(3);
    const std::size_t k = 1 + 2 * rng.below(3);
    const std::size_t stride = 1 + rng.below(2);
    const Padding pad = rng.below(2) == 0 ? Padding::kZero : Padding::kCircular;
    const Shape sx{h, w, cin}, sk{k, k, cin, cout};
    auto x = pack({random_uniform(sx, rng, -1, 1), random_uniform(sk, rng, -1, 1)});
    return GradCase{x, [=](const TensorD& t) {
                      auto p = unpack(t, {sx, sk});
                      return conv2d_same(p[0], p[1], stride, pad);
                    }};
  });
  add_check("conv_transpose2d_same", [](Rng& rng) {
    const std::size_t h = 2 + rng.below(3), w = 2 + rng.below(3), cin = 1 + rng.below(3), cout = 1 + rng.below(3);
    const std::size_t k = 1 + 2 * rng.below(3);
    const std::size_t stride = 1 + rng.below(2);
    const Shape sx{h, w, cin}, sk{k, k, cin, cout};
    auto x = pack({random_uniform(sx, rng, -1, 1), random_uniform(sk, rng, -1, 1)});
    return GradCase{x, [=](const TensorD& t) {
                      auto p = unpack(t, {sx, sk});
                      return conv_transpose2d_same(p[0], p[1], stride);
                    }};
  });
  add_check("spatial_broadcast", [](Rng& rng) {
    return GradCase{random_uniform(Shape{2, 3}, rng, -1, 1),
                    [](const TensorD& x) { return spatial_broadcast(x, 3, 2); }};
  });
  add_check("gru_cell", [](Rng& rng) {
    const std::size_t k = 3, d = 4, din = 5;
    const Shape sh{k, d}, su{k, din}, swi{din, 3 * d}, swh{d, 3 * d}, sb{3 * d};
    auto x = pack({random_uniform(sh, rng, -1, 1), random_uniform(su, rng, -1, 1), random_uniform(swi, rng, -1, 1),
                   random_uniform(swh, rng, -1, 1), random_uniform(sb, rng, -1, 1), random_uniform(sb, rng, -1, 1)});
    return GradCase{x, [=](const TensorD& t) {
                      auto p = unpack(t, {sh, su, swi, swh, sb, sb});
                      return gru_cell(p[0], p[1], GruWeights<double>{p[2], p[3], p[4], p[5]});
                    }};
  });
  add_check("inverted_attention", [](Rng& rng) {
    const bool per_slot = rng.below(2) == 1;
    const Shape sq{3, 4}, sk = per_slot ? Shape{3, 5, 4} : Shape{5, 4};
    auto x = pack({random_uniform(sq, rng, -1, 1), random_uniform(sk, rng, -1, 1)});
    return GradCase{x, [=](const TensorD& t) {
                      auto p = unpack(t, {sq, sk});
                      return inverted_attention(p[0], p[1], 0.5);
                    }};
  });
  add_check("rotation_matrices", [](Rng& rng) {
    return GradCase{random_uniform(Shape{3}, rng, -3, 3), [](const TensorD& x) { return rotation_matrices(x); }};
  });
  add_check("rotation_from_covariance", [](Rng& rng) {
    return GradCase{random_covariances(3, rng), [](const TensorD& x) { return rotation_from_covariance(x); }};
  });

  const auto abs5 = make_abs_grid<double>(5, 5).tensor();
  add_check("estimate_position", [abs5](Rng& rng) {
    return GradCase{random_uniform(Shape{3, 25}, rng, -2, 2),
                    [abs5](const TensorD& x) { return estimate_position(mask_from_logits(x), abs5); }};
  });
  add_check("estimate_scale", [abs5](Rng& rng) {
    const bool rotate = rng.below(2) == 1;
    Array<double> logits = random_uniform(Shape{3, 25}, rng, -2, 2);
    return GradCase{logits, [abs5, rotate](const TensorD& x) {
                      const auto a = mask_from_logits(x);
                      const auto p = estimate_position(a, abs5);
                      if (!rotate) return estimate_scale<double>(a, abs5, p, nullptr, 1e-8);
                      const auto r = estimate_rotation(a, abs5, p);
                      return estimate_scale<double>(a, abs5, p, &r, 1e-8);
                    }};
  });
  add_check("estimate_rotation", [abs5](Rng& rng) {
    Array<double> logits;
    do {
      logits = random_uniform(Shape{3, 25}, rng, -2, 2);
    } while (!rotation_is_smooth(mask_from_logits(TensorD::constant(logits)), abs5));
    return GradCase{logits, [abs5](const TensorD& x) {
                      const auto a = mask_from_logits(x);
                      return estimate_rotation(a, abs5, estimate_position(a, abs5));
                    }};
  });
  add_check("make_rel_grid", [abs5](Rng& rng) {
    const Shape sp{2, 2}, ss{2, 2}, sa{2};
    auto x = pack({random_uniform(sp, rng, -0.5, 0.5), random_uniform(ss, rng, 0.1, 0.5),
                   random_uniform(sa, rng, -0.7, 0.7)});
    return GradCase{x, [=](const TensorD& t) {
                      auto p = unpack(t, {sp, ss, sa});
                      SlotFrames<double> f{p[0], p[1], rotation_matrices(p[2])};
                      return make_rel_grid(abs5, f, 5.0, true);
                    }};
  });
  add_check("frames_to_rel_grid", [abs5](Rng& rng) {
    Array<double> logits;
    do {
      logits = random_uniform(Shape{2, 25}, rng, -2, 2);
    } while (!rotation_is_smooth(mask_from_logits(TensorD::constant(logits)), abs5));
    return GradCase{logits, [abs5](const TensorD& x) {
                      const auto a = mask_from_logits(x);
                      SlotFrames<double> f;
                      f.position = estimate_position(a, abs5);
                      f.rotation = estimate_rotation(a, abs5, f.position);
                      f.scale = estimate_scale<double>(a, abs5, f.position, &f.rotation, 1e-8);
                      return make_rel_grid(abs5, f, 5.0, true);
                    }};
  });
  return out;
}

// The full ISA-TSR attention loop plus MLP decoder on a 4x4 token grid with
// K=2 and width 8, checked against every input and every parameter.
std::vector<PropertyResult> composed_checks() {
  ModelConfig cfg = tiny_model_config(Variant::kIsaTSR);
  const auto store = init_params(cfg, 7).cast<double>();
  const auto grid = make_abs_grid<double>(4, 4);
  std::vector<PropertyResult> out;

  const std::size_t instances = 3;
  PropertyResult inputs;
  inputs.name = "grad/isa_tsr_composed/tokens";
  inputs.tolerance = kTol;
  inputs.passed = true;
  PropertyResult params;
  params.name = "grad/isa_tsr_composed/parameters";
  params.tolerance = kTol;
  params.passed = true;
  std::size_t checked_params = 0;

  for (std::size_t i = 0; i < instances; ++i) {
    Rng rng(derive_seed(900, i));
    const auto tokens = random_uniform(Shape{16, cfg.encoder.channels}, rng, -1, 1);
    const auto target = TensorD::constant(random_uniform(Shape{4, 4, 3}, rng, 0, 1));
    Rng frame_rng(derive_seed(901, i));
    SlotState<double> init;
    init.frames = init_frames<double>(cfg.frame_init, cfg.num_slots, true, frame_rng, nullptr);

    auto loss_with = [&](ParamBinding<double>& b, const TensorD& tok) {
      SlotState<double> s = init;
      s.latents = b("slots/init");
      const auto w = AttentionWeights<double>::bind(b);
      const auto st = run_isa(tok, grid, s, cfg, w);
      const auto dec = decode(st.latents, st.frames, grid, cfg, b);
      return reconstruction_loss(composite(dec), target);
    };

    const auto rep = grad_check(
        [&](const TensorD& t) {
          ParamBinding<double> b(store);
          return loss_with(b, t);
        },
        tokens, kComposedEps, kTol);
    inputs.measured = std::max(inputs.measured, rep.max_rel_error);
    if (!rep.passed && inputs.passed) {
      inputs.passed = false;
      inputs.detail = "instance " + std::to_string(i) + ": " + rep.diagnostic;
    }

    for (const auto& [name, value] : store.entries()) {
      const auto prep = grad_check(
          [&, name = name](const TensorD& t) {
            ParamBinding<double> b(store);
            b.substitute(name, t);
            return loss_with(b, TensorD::constant(tokens));
          },
          value, kComposedEps, kTol);
      ++checked_params;
      params.measured = std::max(params.measured, prep.max_rel_error);
      if (!prep.passed && params.passed) {
        params.passed = false;
        params.detail = "instance " + std::to_string(i) + " parameter " + name + ": " + prep.diagnostic;
      }
    }
  }
  if (inputs.passed) inputs.detail = std::to_string(instances) + " instances, 4x4 grid, K=2, D=8";
  if (params.passed) params.detail = std::to_string(checked_params) + " parameter tensors checked";
  out.push_back(inputs);
  out.push_back(params);
  return out;
}

}  // namespace

SuiteReport grad_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport r;
  r.suite = "grad";
  r.properties = op_checks();
  for (auto& p : composed_checks()) r.properties.push_back(std::move(p));
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace slotframes::verify
