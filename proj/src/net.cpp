#include "homnet/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "homnet/error.hpp"
#include "homnet/rng.hpp"

namespace homnet {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> dense_weights(const Network& net, const LayerSpec& l) {
  return {net.params.data() + l.weight_offset, l.out_width, l.in_width};
}

bool norm_active(const LayerSpec& l) { return l.layernorm && l.out_width >= 2; }

// out = sum_e w[e] * in[:, cols[e]] over m rows.
void masked_unit(const double* __restrict in, Eigen::Index m, const std::vector<int>& cols, const double* w,
                 double* __restrict out) {
  const double* c0 = in + Eigen::Index{cols[0]} * m;
  for (Eigen::Index t = 0; t < m; ++t) out[t] = w[0] * c0[t];
  for (std::size_t e = 1; e < cols.size(); ++e) {
    const double* c = in + Eigen::Index{cols[e]} * m;
    const double we = w[e];
    for (Eigen::Index t = 0; t < m; ++t) out[t] += we * c[t];
  }
}

void masked_unit_grad(const double* __restrict in, const double* __restrict g, Eigen::Index m,
                      const std::vector<int>& cols, const double* w, double* gw, double* __restrict dprev) {
  for (std::size_t e = 0; e < cols.size(); ++e) {
    const double* c = in + Eigen::Index{cols[e]} * m;
    gw[e] += Eigen::Map<const Vector>(c, m).dot(Eigen::Map<const Vector>(g, m));
    if (dprev) {
      double* d = dprev + Eigen::Index{cols[e]} * m;
      const double we = w[e];
      for (Eigen::Index t = 0; t < m; ++t) d[t] += we * g[t];
    }
  }
}

}  // namespace

Network assemble_network(int p, const std::vector<LayerDesc>& layers, const std::vector<int>& readout_layers,
                         bool combiner, std::string kind) {
  if (p < 1) throw ConfigError("network input width must be positive");
  if (layers.empty()) throw ConfigError("network needs at least one hidden layer");
  if (readout_layers.empty()) throw ConfigError("network needs at least one readout");
  if (!combiner && readout_layers.size() != 1) throw ConfigError("a network without a combiner takes exactly one readout");

  Network net;
  net.p = p;
  net.kind = std::move(kind);
  std::size_t offset = 0;
  int in_width = p;
  for (const auto& d : layers) {
    if (d.out_width < 1) throw ConfigError("layer width must be positive");
    LayerSpec l;
    l.in_width = in_width;
    l.out_width = d.out_width;
    l.dense = d.mask_rows.empty();
    l.layernorm = d.layernorm;
    l.activation = d.activation;
    l.weight_offset = offset;
    if (l.dense) {
      offset += static_cast<std::size_t>(l.in_width) * static_cast<std::size_t>(l.out_width);
    } else {
      if (static_cast<int>(d.mask_rows.size()) != d.out_width) throw ConfigError("mask has the wrong number of rows");
      l.mask_rows = d.mask_rows;
      for (auto& row : l.mask_rows) {
        std::sort(row.begin(), row.end());
        if (row.empty()) throw ConfigError("masked layer has a unit with no inputs");
        if (std::adjacent_find(row.begin(), row.end()) != row.end()) throw ConfigError("duplicate mask entry");
        if (row.front() < 0 || row.back() >= in_width) throw ConfigError("mask entry out of range");
      }
      l.row_offset.reserve(l.mask_rows.size() + 1);
      for (const auto& row : l.mask_rows) {
        l.row_offset.push_back(offset);
        offset += row.size();
      }
      l.row_offset.push_back(offset);
    }
    l.bias_offset = offset;
    offset += static_cast<std::size_t>(l.out_width);
    net.layers.push_back(std::move(l));
    in_width = d.out_width;
  }
  for (int layer : readout_layers) {
    if (layer < 0 || layer >= static_cast<int>(layers.size())) throw ConfigError("readout layer out of range");
    net.readouts.push_back({layer, offset});
    offset += static_cast<std::size_t>(net.layer_width(layer)) + 1;
  }
  net.has_combiner = combiner;
  net.combiner_offset = offset;
  if (combiner) offset += net.readouts.size() + 1;
  net.params.assign(offset, 0.0);
  return net;
}

Network build_hnn(const Wiring& wiring) {
  if (wiring.k_max() < 2 || wiring.widths[1] == 0)
    throw ConfigError(
        "cannot build an interaction network: the hierarchy has no order-2 units "
        "(the clique forest consists of singletons only)");
  std::vector<LayerDesc> layers;
  std::vector<int> readouts;
  for (int k = 2; k <= wiring.k_max(); ++k) {
    LayerDesc d;
    d.out_width = wiring.widths[static_cast<std::size_t>(k - 1)];
    d.mask_rows = wiring.parents[static_cast<std::size_t>(k - 1)];
    d.layernorm = true;
    layers.push_back(std::move(d));
    readouts.push_back(k - 2);
  }
  return assemble_network(wiring.p, layers, readouts, true, "hnn");
}

Network build_mlp_hnn(const InteractionHierarchy& h) {
  if (h.k_max() < 2 || h.units(2) == 0)
    throw ConfigError("cannot build a dense hierarchy network: the hierarchy has no order-2 units");
  std::vector<LayerDesc> layers;
  std::vector<int> readouts;
  for (int k = 2; k <= h.k_max(); ++k) {
    LayerDesc d;
    d.out_width = static_cast<int>(h.units(k));
    d.layernorm = true;
    layers.push_back(std::move(d));
    readouts.push_back(k - 2);
  }
  return assemble_network(h.p, layers, readouts, true, "mlp-hnn");
}

Network build_mlp(int p, const std::vector<int>& hidden_widths) {
  if (hidden_widths.empty()) throw ConfigError("MLP needs at least one hidden layer");
  std::vector<LayerDesc> layers;
  for (int w : hidden_widths) {
    if (w < 1) throw ConfigError("MLP widths must be at least 1");
    layers.push_back({w, {}, false, Activation::relu});
  }
  return assemble_network(p, layers, {static_cast<int>(hidden_widths.size()) - 1}, false, "mlp");
}

Network build_pm_mlp(int p, std::size_t target_params) {
  const double raw = (static_cast<double>(target_params) - 1.0) / static_cast<double>(p + 2);
  const int width = std::max(1, static_cast<int>(std::lround(raw)));
  Network net = build_mlp(p, {width});
  net.kind = "pm-mlp";
  return net;
}

Network densify(const Network& net) {
  std::vector<LayerDesc> layers;
  for (const auto& l : net.layers) layers.push_back({l.out_width, {}, l.layernorm, l.activation});
  std::vector<int> readouts;
  for (const auto& r : net.readouts) readouts.push_back(r.layer);
  Network out = assemble_network(net.p, layers, readouts, net.has_combiner, net.kind + "-dense");
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const auto& src = net.layers[li];
    const auto& dst = out.layers[li];
    for (int i = 0; i < src.out_width; ++i) {
      const auto row = static_cast<std::size_t>(i);
      if (src.dense) {
        for (int j = 0; j < src.in_width; ++j)
          out.params[dst.weight_offset + row * static_cast<std::size_t>(dst.in_width) + static_cast<std::size_t>(j)] =
              net.params[src.weight_offset + row * static_cast<std::size_t>(src.in_width) + static_cast<std::size_t>(j)];
      } else {
        const auto& cols = src.mask_rows[row];
        for (std::size_t e = 0; e < cols.size(); ++e)
          out.params[dst.weight_offset + row * static_cast<std::size_t>(dst.in_width) + static_cast<std::size_t>(cols[e])] =
              net.params[src.row_offset[row] + e];
      }
      out.params[dst.bias_offset + row] = net.params[src.bias_offset + row];
    }
  }
  for (std::size_t r = 0; r < net.readouts.size(); ++r) {
    const auto width = static_cast<std::size_t>(net.layer_width(net.readouts[r].layer)) + 1;
    std::copy_n(net.params.begin() + static_cast<std::ptrdiff_t>(net.readouts[r].offset), width,
                out.params.begin() + static_cast<std::ptrdiff_t>(out.readouts[r].offset));
  }
  if (net.has_combiner)
    std::copy_n(net.params.begin() + static_cast<std::ptrdiff_t>(net.combiner_offset), net.readouts.size() + 1,
                out.params.begin() + static_cast<std::ptrdiff_t>(out.combiner_offset));
  return out;
}

void init_params(Network& net, std::uint64_t seed) {
  std::fill(net.params.begin(), net.params.end(), 0.0);
  Rng base = Rng(seed).split("init");
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    Rng rng = base.split(static_cast<std::uint64_t>(li));
    const auto& l = net.layers[li];
    for (int i = 0; i < l.out_width; ++i) {
      const auto row = static_cast<std::size_t>(i);
      const double s = std::sqrt(6.0 / static_cast<double>(l.fan_in(i)));
      const std::size_t begin = l.dense ? l.weight_offset + row * static_cast<std::size_t>(l.in_width) : l.row_offset[row];
      const std::size_t end = begin + l.fan_in(i);
      for (std::size_t k = begin; k < end; ++k) net.params[k] = rng.uniform(-s, s);
    }
  }
  for (std::size_t r = 0; r < net.readouts.size(); ++r) {
    Rng rng = base.split("readout").split(static_cast<std::uint64_t>(r));
    const auto width = static_cast<std::size_t>(net.layer_width(net.readouts[r].layer));
    const double s = std::sqrt(6.0 / static_cast<double>(width));
    for (std::size_t k = 0; k < width; ++k) net.params[net.readouts[r].offset + k] = rng.uniform(-s, s);
  }
  if (net.has_combiner) {
    const double beta = 1.0 / static_cast<double>(net.readouts.size());
    for (std::size_t r = 0; r < net.readouts.size(); ++r) net.params[net.combiner_offset + r] = beta;
  }
}

Vector forward(const Network& net, const Matrix& batch, ForwardCache& cache) {
  if (batch.cols() != net.p)
    throw ConfigError("forward: batch width " + std::to_string(batch.cols()) + " does not match network input width " +
                      std::to_string(net.p));
  if (!batch.allFinite()) throw ConfigError("forward: batch contains non-finite values");

  // Activations are m x width: one column per unit, so a masked unit is a
  // short sum of column axpys.
  const auto m = batch.rows();
  cache.batch = static_cast<int>(m);
  cache.input = batch;
  cache.normalized.resize(net.layers.size());
  cache.inv_std.resize(net.layers.size());
  cache.activations.resize(net.layers.size());

  const double* params = net.params.data();
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const auto& l = net.layers[li];
    const Matrix& prev = li == 0 ? cache.input : cache.activations[li - 1];
    Matrix& z = cache.normalized[li];
    z.resize(m, l.out_width);
    if (l.dense) {
      z.noalias() = prev * dense_weights(net, l).transpose();
    } else {
      for (int i = 0; i < l.out_width; ++i) {
        const auto row = static_cast<std::size_t>(i);
        masked_unit(prev.data(), m, l.mask_rows[row], params + l.row_offset[row], z.data() + Eigen::Index{i} * m);
      }
    }

    const double* bias = params + l.bias_offset;
    Matrix& h = cache.activations[li];
    h.resize(m, l.out_width);
    const bool relu = l.activation == Activation::relu;
    if (norm_active(l)) {
      const double width = static_cast<double>(l.out_width);
      Vector mu = Vector::Zero(m);
      for (Eigen::Index i = 0; i < l.out_width; ++i) {
        z.col(i).array() += bias[i];
        mu += z.col(i);
      }
      mu /= width;
      Vector& inv = cache.inv_std[li];
      inv.setZero(m);
      for (Eigen::Index i = 0; i < l.out_width; ++i) inv.array() += (z.col(i) - mu).array().square();
      inv = (inv.array() / width + kLayerNormEps).rsqrt().matrix();
      for (Eigen::Index i = 0; i < l.out_width; ++i) {
        z.col(i) = ((z.col(i) - mu).array() * inv.array()).matrix();
        if (relu)
          h.col(i) = z.col(i).cwiseMax(0.0);
        else
          h.col(i) = z.col(i);
      }
    } else {
      for (Eigen::Index i = 0; i < l.out_width; ++i) {
        z.col(i).array() += bias[i];
        if (relu)
          h.col(i) = z.col(i).cwiseMax(0.0);
        else
          h.col(i) = z.col(i);
      }
    }
  }

  const auto nr = static_cast<Eigen::Index>(net.readouts.size());
  cache.readouts.resize(m, nr);
  for (Eigen::Index r = 0; r < nr; ++r) {
    const auto& ro = net.readouts[static_cast<std::size_t>(r)];
    const auto width = net.layer_width(ro.layer);
    Eigen::Map<const Vector> a(params + ro.offset, width);
    cache.readouts.col(r).noalias() = cache.activations[static_cast<std::size_t>(ro.layer)] * a;
    cache.readouts.col(r).array() += params[ro.offset + static_cast<std::size_t>(width)];
  }

  if (!net.has_combiner) return cache.readouts.col(0);
  Eigen::Map<const Vector> beta(params + net.combiner_offset, nr);
  Vector y = cache.readouts * beta;
  y.array() += params[net.combiner_offset + static_cast<std::size_t>(nr)];
  return y;
}

Vector predict(const Network& net, const Matrix& batch) {
  ForwardCache cache;
  return forward(net, batch, cache);
}

std::vector<double> backward(const Network& net, const ForwardCache& cache, const Vector& loss_grad) {
  const auto m = static_cast<Eigen::Index>(cache.batch);
  const auto nr = static_cast<Eigen::Index>(net.readouts.size());
  if (loss_grad.size() != m || cache.activations.size() != net.layers.size() || cache.readouts.cols() != nr ||
      cache.readouts.rows() != m)
    throw ConfigError("backward: cache does not match the network or the loss gradient");
  for (std::size_t li = 0; li < net.layers.size(); ++li)
    if (cache.activations[li].rows() != m || cache.activations[li].cols() != net.layers[li].out_width ||
        cache.normalized[li].cols() != net.layers[li].out_width)
      throw ConfigError("backward: cache layer " + std::to_string(li) + " does not match the network");
  if (cache.input.cols() != net.p) throw ConfigError("backward: cache input width does not match the network");

  std::vector<double> grad(net.params.size(), 0.0);
  const double* params = net.params.data();

  // dloss / dr, one column per readout.
  Matrix dr(m, nr);
  if (net.has_combiner) {
    Eigen::Map<const Vector> beta(params + net.combiner_offset, nr);
    Eigen::Map<Vector>(grad.data() + net.combiner_offset, nr).noalias() = cache.readouts.transpose() * loss_grad;
    grad[net.combiner_offset + static_cast<std::size_t>(nr)] = loss_grad.sum();
    dr.noalias() = loss_grad * beta.transpose();
  } else {
    dr.col(0) = loss_grad;
  }

  std::vector<Matrix> dh(net.layers.size());
  for (std::size_t li = 0; li < net.layers.size(); ++li) dh[li].setZero(m, net.layers[li].out_width);

  for (Eigen::Index r = 0; r < nr; ++r) {
    const auto& ro = net.readouts[static_cast<std::size_t>(r)];
    const auto width = net.layer_width(ro.layer);
    Eigen::Map<Vector>(grad.data() + ro.offset, width).noalias() =
        cache.activations[static_cast<std::size_t>(ro.layer)].transpose() * dr.col(r);
    grad[ro.offset + static_cast<std::size_t>(width)] = dr.col(r).sum();
    Eigen::Map<const Vector> a(params + ro.offset, width);
    dh[static_cast<std::size_t>(ro.layer)].noalias() += dr.col(r) * a.transpose();
  }

  Matrix dz;
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const auto& l = net.layers[li];
    const Matrix& zn = cache.normalized[li];
    const bool relu = l.activation == Activation::relu;
    dz.resize(m, l.out_width);
    double* gbias = grad.data() + l.bias_offset;
    if (norm_active(l)) {
      const double width = static_cast<double>(l.out_width);
      Vector mean_g = Vector::Zero(m);
      Vector mean_gx = Vector::Zero(m);
      for (Eigen::Index i = 0; i < l.out_width; ++i) {
        if (relu)
          dz.col(i) = (zn.col(i).array() > 0.0).select(dh[li].col(i), 0.0);
        else
          dz.col(i) = dh[li].col(i);
        mean_g += dz.col(i);
        mean_gx.array() += dz.col(i).array() * zn.col(i).array();
      }
      mean_g /= width;
      mean_gx /= width;
      const Vector& inv = cache.inv_std[li];
      for (Eigen::Index i = 0; i < l.out_width; ++i) {
        dz.col(i) = ((dz.col(i) - mean_g).array() - zn.col(i).array() * mean_gx.array()) * inv.array();
        gbias[i] = dz.col(i).sum();
      }
    } else {
      for (Eigen::Index i = 0; i < l.out_width; ++i) {
        if (relu)
          dz.col(i) = (zn.col(i).array() > 0.0).select(dh[li].col(i), 0.0);
        else
          dz.col(i) = dh[li].col(i);
        gbias[i] = dz.col(i).sum();
      }
    }

    const Matrix& prev = li == 0 ? cache.input : cache.activations[li - 1];
    if (l.dense) {
      Eigen::Map<RowMajor>(grad.data() + l.weight_offset, l.out_width, l.in_width).noalias() = dz.transpose() * prev;
      if (li > 0) dh[li - 1].noalias() += dz * dense_weights(net, l);
    } else {
      double* dprev = li > 0 ? dh[li - 1].data() : nullptr;
      for (int i = 0; i < l.out_width; ++i) {
        const auto row = static_cast<std::size_t>(i);
        masked_unit_grad(prev.data(), dz.data() + Eigen::Index{i} * m, m, l.mask_rows[row],
                         params + l.row_offset[row], grad.data() + l.row_offset[row], dprev);
      }
    }
  }
  return grad;
}

double mse(const Vector& pred, const Vector& target, Vector* grad) {
  if (pred.size() != target.size() || pred.size() == 0) throw ConfigError("mse: length mismatch");
  const Vector resid = pred - target;
  const double m = static_cast<double>(pred.size());
  if (grad) *grad = resid * (2.0 / m);
  return resid.squaredNorm() / m;
}

nlohmann::json architecture_json(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers) {
    nlohmann::json j = {{"in", l.in_width},
                        {"out", l.out_width},
                        {"layernorm", l.layernorm},
                        {"activation", l.activation == Activation::relu ? "relu" : "identity"},
                        {"weight_offset", l.weight_offset},
                        {"bias_offset", l.bias_offset}};
    j["mask_rows"] = l.dense ? nlohmann::json(nullptr) : nlohmann::json(l.mask_rows);
    layers.push_back(std::move(j));
  }
  nlohmann::json readouts = nlohmann::json::array();
  for (const auto& r : net.readouts) readouts.push_back({{"layer", r.layer}, {"offset", r.offset}});
  return {{"kind", net.kind},
          {"p", net.p},
          {"layers", layers},
          {"readouts", readouts},
          {"combiner", net.has_combiner},
          {"combiner_offset", net.combiner_offset},
          {"param_count", net.params.size()}};
}

namespace {

constexpr char kMagic[] = "HOMNET1\n";

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xFF) << (8 * (7 - i));
  return out;
}

}  // namespace

void save_checkpoint(const Network& net, const std::filesystem::path& path, const nlohmann::json& extra) {
  nlohmann::json header = {{"format", "HOMNET1"}, {"architecture", architecture_json(net)}};
  if (!extra.is_null()) header["extra"] = extra;
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic) - 1);
  const std::uint64_t len = to_le(text.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double v : net.params) {
    const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
  }
  if (!out) throw RuntimeFailure("failed writing checkpoint " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw ConfigError("not a HOMNET1 checkpoint: " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  len = to_le(len);
  if (!in || len > (1ULL << 32)) throw ConfigError("corrupt checkpoint header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("corrupt checkpoint header: ") + e.what());
  }
  const auto& arch = header.at("architecture");
  std::vector<LayerDesc> layers;
  for (const auto& l : arch.at("layers")) {
    LayerDesc d;
    d.out_width = l.at("out").get<int>();
    if (!l.at("mask_rows").is_null()) d.mask_rows = l.at("mask_rows").get<std::vector<std::vector<int>>>();
    d.layernorm = l.at("layernorm").get<bool>();
    d.activation = l.at("activation").get<std::string>() == "relu" ? Activation::relu : Activation::identity;
    layers.push_back(std::move(d));
  }
  std::vector<int> readouts;
  for (const auto& r : arch.at("readouts")) readouts.push_back(r.at("layer").get<int>());
  Network net = assemble_network(arch.at("p").get<int>(), layers, readouts, arch.at("combiner").get<bool>(),
                                 arch.at("kind").get<std::string>());
  if (net.params.size() != arch.at("param_count").get<std::size_t>())
    throw ConfigError("checkpoint parameter count does not match its architecture");
  for (double& v : net.params) {
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof(bits));
    v = std::bit_cast<double>(to_le(bits));
  }
  if (!in) throw ConfigError("checkpoint truncated: " + path.string());
  if (extra) *extra = header.value("extra", nlohmann::json());
  return net;
}

}  // namespace homnet
