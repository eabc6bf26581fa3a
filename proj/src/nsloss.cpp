#include "nsf/nsloss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nsf/optim.hpp"

namespace nsf {

using diff::Tape;
using diff::Var;

void Triplet::validate() const {
  const auto check_rgb = [&](const Image& im, const char* what) {
    if (im.width != center.width || im.height != center.height || im.channels != 3) {
      throw ShapeError(std::string("triplet: ") + what + " must be H x W x 3 matching the center view");
    }
  };
  const auto check_map = [&](const auto& im, const char* what) {
    if (im.width != center.width || im.height != center.height || im.channels != 1) {
      throw ShapeError(std::string("triplet: ") + what + " must be a single-channel H x W map");
    }
  };
  check_rgb(center, "center");
  check_rgb(left, "left");
  check_rgb(right, "right");
  check_map(disparity, "disparity");
  check_map(ao, "ao");
  check_map(valid, "valid");
  if (!depth.data.empty()) check_map(depth, "depth");
}

void LossConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("loss config: beta must lie in [0,1]");
  if (!(th >= 0.0 && th <= 1.0)) throw DomainError("loss config: th must lie in [0,1]");
  if (!(gamma_3rho >= 0.0) || !(gamma_disp >= 0.0)) throw DomainError("loss config: weights must be >= 0");
  if (window < 1 || window % 2 == 0) throw DomainError("loss config: window must be odd and positive");
}

LossConfig LossConfig::row(char id) {
  LossConfig c;
  switch (id) {
    case 'A':
      c.photometric = PhotometricMode::single_pair;
      c.disparity_term = false;
      break;
    case 'C':
      c.disparity_term = false;
      break;
    case 'E':
      c.gamma_3rho = 0.0;
      c.gate = AoGate::none;
      break;
    case 'F':
      c.gamma_3rho = 0.0;
      c.gate = AoGate::binary;
      break;
    case 'G':
      c.photometric = PhotometricMode::single_pair;
      c.gate = AoGate::binary;
      break;
    case 'H':
      c.gate = AoGate::binary;
      break;
    case 'I':
      break;
    default:
      throw DomainError(std::string("unknown ablation row '") + id + "' (expected A, C, E, F, G, H or I)");
  }
  return c;
}

double ao_gate(double ao, bool valid, const LossConfig& cfg) {
  if (!cfg.disparity_term || !valid) return 0.0;
  switch (cfg.gate) {
    case AoGate::none:
      return 1.0;
    case AoGate::binary:
      return ao < cfg.th ? 0.0 : 1.0;
    case AoGate::ao:
      break;
  }
  return ao < cfg.th ? 0.0 : std::clamp(ao, 0.0, 1.0);
}

namespace {

template <class T>
std::vector<T> flat(const Image& im) {
  return std::vector<T>(im.data.begin(), im.data.end());
}

template <class T>
Image to_map(std::span<const T> v, int w, int h) {
  Image out(w, h, 1);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = static_cast<float>(v[i]);
  return out;
}

template <class T>
Var rho(Tape<T>& tp, Var center, Var rec, const kernels::ImageExtent& ext, const LossConfig& cfg) {
  const Var s = diff::ssim(tp, center, rec, ext, cfg.window);
  const Var ssim_term = diff::scale(tp, diff::add_scalar(tp, diff::scale(tp, s, T(-1)), T(1)), T(cfg.beta / 2));
  const Var l1 = diff::row_mean(tp, diff::abs(tp, diff::sub(tp, center, rec)));
  return diff::add(tp, ssim_term, diff::scale(tp, l1, T(1.0 - cfg.beta)));
}

}  // namespace

template <class T>
Var ns_loss_graph(Tape<T>& tp, Var d, const Triplet& tr, const LossConfig& cfg, LossReport* report) {
  cfg.validate();
  tr.validate();
  const int W = tr.width(), H = tr.height();
  const auto n = static_cast<std::size_t>(W) * H;
  if (tp.value(d).size() != n) throw ShapeError("ns_loss: d_hat must have one value per pixel");
  const kernels::ImageExtent ext{W, H, 3};
  const bool triplet = cfg.photometric == PhotometricMode::triplet;

  const auto ic_v = flat<T>(tr.center), il_v = flat<T>(tr.left), ir_v = flat<T>(tr.right);
  const Var ic = tp.constant(ic_v, static_cast<int>(n), 3);

  auto [wr, inb_r] = diff::warp_horizontal<T>(tp, ir_v, d, ext, kernels::WarpSide::right);
  const Var rho_r = rho(tp, ic, wr, ext, cfg);
  const Var id_r = rho(tp, ic, tp.constant(ir_v, static_cast<int>(n), 3), ext, cfg);

  Var rho_l, id_l, l3;
  std::vector<std::uint8_t> inb_l(n, 0), choose_l(n, 0);
  if (triplet) {
    auto warped = diff::warp_horizontal<T>(tp, il_v, d, ext, kernels::WarpSide::left);
    inb_l = std::move(warped.second);
    rho_l = rho(tp, ic, warped.first, ext, cfg);
    id_l = rho(tp, ic, tp.constant(il_v, static_cast<int>(n), 3), ext, cfg);
    const auto vl = tp.value(rho_l), vr = tp.value(rho_r);
    for (std::size_t i = 0; i < n; ++i) {
      if (inb_l[i] && inb_r[i]) choose_l[i] = vl[i] <= vr[i];
      else choose_l[i] = inb_l[i];
    }
    l3 = diff::select(tp, rho_l, rho_r, choose_l);
  } else {
    l3 = rho_r;
  }

  const auto v3 = tp.value(l3), vid_r = tp.value(id_r);
  std::vector<T> mu(n), eta(n), coef_disp(n), coef_photo(n);
  std::vector<std::uint8_t> active(n), valid(n);
  for (std::size_t i = 0; i < n; ++i) {
    T identity = vid_r[i];
    bool any_inbounds = inb_r[i] != 0;
    if (triplet) {
      identity = std::min(identity, tp.value(id_l)[i]);
      any_inbounds = any_inbounds || inb_l[i];
    }
    mu[i] = (any_inbounds && v3[i] < identity) ? T(1) : T(0);
    valid[i] = tr.valid.data[i] != 0;
    eta[i] = static_cast<T>(ao_gate(tr.ao.data[i], valid[i], cfg));
    coef_disp[i] = static_cast<T>(cfg.gamma_disp) * eta[i];
    coef_photo[i] = mu[i] * static_cast<T>(cfg.gamma_3rho) * (T(1) - eta[i]);
    active[i] = coef_disp[i] > T(0) || coef_photo[i] > T(0);
  }

  std::vector<T> dc(n), valid_t(n);
  for (std::size_t i = 0; i < n; ++i) {
    dc[i] = valid[i] ? static_cast<T>(tr.disparity.data[i]) : T(0);
    valid_t[i] = valid[i] ? T(1) : T(0);
  }
  const int rows = static_cast<int>(n);
  const Var ldisp = diff::mul(tp, tp.constant(valid_t, rows, 1), diff::abs(tp, diff::sub(tp, d, tp.constant(dc, rows, 1))));
  const Var lns = diff::add(tp, diff::mul(tp, tp.constant(coef_disp, rows, 1), ldisp),
                            diff::mul(tp, tp.constant(coef_photo, rows, 1), l3));
  const Var out = diff::masked_mean(tp, lns, active);

  if (report) {
    LossReport& r = *report;
    r.rho_right = to_map<T>(tp.value(rho_r), W, H);
    r.rho_identity_right = to_map<T>(tp.value(id_r), W, H);
    if (triplet) {
      r.rho_left = to_map<T>(tp.value(rho_l), W, H);
      r.rho_identity_left = to_map<T>(tp.value(id_l), W, H);
    } else {
      r.rho_left = Image(W, H, 1);
      r.rho_identity_left = Image(W, H, 1);
    }
    r.l3rho = to_map<T>(v3, W, H);
    r.mu = to_map<T>(std::span<const T>(mu), W, H);
    r.eta = to_map<T>(std::span<const T>(eta), W, H);
    r.ldisp = to_map<T>(tp.value(ldisp), W, H);
    r.lns = to_map<T>(tp.value(lns), W, H);
    r.active = Mask(W, H, 1);
    r.active.data = active;
    r.lns_mean = static_cast<double>(tp.scalar(out));
    r.active_pixels = static_cast<std::size_t>(std::count(active.begin(), active.end(), 1));
    double s3 = 0.0, sd = 0.0;
    std::size_t nv = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s3 += static_cast<double>(v3[i]);
      if (valid[i]) {
        sd += static_cast<double>(tp.value(ldisp)[i]);
        ++nv;
      }
    }
    r.l3rho_mean = s3 / static_cast<double>(n);
    r.ldisp_mean = nv ? sd / static_cast<double>(nv) : 0.0;
  }
  return out;
}

template Var ns_loss_graph<float>(Tape<float>&, Var, const Triplet&, const LossConfig&, LossReport*);
template Var ns_loss_graph<double>(Tape<double>&, Var, const Triplet&, const LossConfig&, LossReport*);

LossReport ns_loss(const Triplet& triplet, const Image& d_hat, const LossConfig& cfg) {
  require_same_extent(triplet.center, d_hat, "ns_loss");
  Tape<double> tp(false);
  LossReport r;
  ns_loss_graph<double>(tp, tp.constant(flat<double>(d_hat), static_cast<int>(d_hat.data.size()), 1), triplet,
                        cfg, &r);
  return r;
}

LossWithGradient ns_loss_with_gradient(const Triplet& triplet, const Image& d_hat, const LossConfig& cfg) {
  require_same_extent(triplet.center, d_hat, "ns_loss");
  if (d_hat.channels != 1) throw ShapeError("ns_loss: d_hat must be single-channel");
  diff::ParamSet<double> ps;
  ps.add("disparity", "disparity", {d_hat.data.size()}).value = flat<double>(d_hat);
  LossWithGradient out;
  diff::Tape<double> tp(true);
  const Var d = tp.parameter(ps, "disparity", static_cast<int>(d_hat.data.size()), 1);
  const Var loss = ns_loss_graph<double>(tp, d, triplet, cfg, &out.report);
  auto grads = ps.zeros_like();
  tp.backward(loss, grads);
  out.grad = grads["disparity"].value;
  return out;
}

// ---------------------------------------------------------------- standalone

Image ssim(const Image& a, const Image& b, int window) {
  if (!a.same_shape(b)) throw ShapeError("ssim: images differ in shape");
  const kernels::ImageExtent ext{a.width, a.height, a.channels};
  std::vector<double> out(ext.pixels());
  kernels::ssim_forward<double>(flat<double>(a), flat<double>(b), ext, window, out);
  return to_map<double>(out, a.width, a.height);
}

WarpResult warp_horizontal(const Image& target, const Image& disp, kernels::WarpSide side) {
  require_same_extent(target, disp, "warp_horizontal");
  if (disp.channels != 1) throw ShapeError("warp_horizontal: disparity must be single-channel");
  const kernels::ImageExtent ext{target.width, target.height, target.channels};
  std::vector<double> out(target.data.size());
  WarpResult r{Image(target.width, target.height, target.channels), Mask(target.width, target.height, 1)};
  kernels::warp_forward<double>(flat<double>(target), flat<double>(disp), ext, side, out, r.inbounds.data);
  for (std::size_t i = 0; i < out.size(); ++i) r.image.data[i] = static_cast<float>(out[i]);
  return r;
}

Image photometric_loss(const Image& center, const Image& reconstructed, const LossConfig& cfg) {
  if (!center.same_shape(reconstructed)) throw ShapeError("photometric_loss: images differ in shape");
  cfg.validate();
  const kernels::ImageExtent ext{center.width, center.height, center.channels};
  Tape<double> tp(false);
  const int rows = static_cast<int>(ext.pixels());
  const Var r = rho(tp, tp.constant(flat<double>(center), rows, ext.channels),
                    tp.constant(flat<double>(reconstructed), rows, ext.channels), ext, cfg);
  return to_map<double>(tp.value(r), center.width, center.height);
}

TripletLoss triplet_loss(const Image& left, const Image& center, const Image& right, const Image& disp,
                         const LossConfig& cfg) {
  Triplet t;
  t.left = left;
  t.center = center;
  t.right = right;
  t.disparity = Image(center.width, center.height, 1);
  t.ao = Image(center.width, center.height, 1);
  t.valid = Mask(center.width, center.height, 1);
  LossConfig c = cfg;
  c.disparity_term = false;
  const LossReport r = ns_loss(t, disp, c);
  return {r.l3rho, r.mu};
}

MaskedMap disparity_loss(const Image& rendered, const Image& predicted, const Mask& valid) {
  require_same_extent(rendered, predicted, "disparity_loss");
  require_same_extent(rendered, valid, "disparity_loss");
  MaskedMap m{Image(rendered.width, rendered.height, 1), 0.0, 0};
  double s = 0.0;
  for (std::size_t i = 0; i < m.map.data.size(); ++i) {
    if (!valid.data[i]) continue;
    m.map.data[i] = std::abs(rendered.data[i] - predicted.data[i]);
    s += m.map.data[i];
    ++m.count;
  }
  m.mean = m.count ? s / static_cast<double>(m.count) : 0.0;
  return m;
}

}  // namespace nsf
