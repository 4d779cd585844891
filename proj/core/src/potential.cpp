#include "nnmd/potential.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace nnmd {

template <typename T>
template <typename U>
Mlp<U> Mlp<T>::cast() const {
  Mlp<U> out;
  out.linear_output = linear_output;
  for (const auto& l : layers) {
    DenseLayer<U> d;
    d.w = l.w.template cast<U>();
    d.wt = l.wt.template cast<U>();
    d.b.assign(l.b.begin(), l.b.end());
    out.layers.push_back(std::move(d));
  }
  return out;
}

void ModelDims::validate() const {
  if (ntypes < 1) throw Error(ErrorKind::Model, "ntypes must be >= 1");
  if (embed.empty() || fit.empty())
    throw Error(ErrorKind::Model, "embedding and fitting widths must be non-empty");
  for (int w : embed)
    if (w < 1) throw Error(ErrorKind::Model, "embedding widths must be >= 1");
  for (int w : fit)
    if (w < 1) throw Error(ErrorKind::Model, "fitting widths must be >= 1");
  if (m2 < 1 || m2 > m1())
    throw Error(ErrorKind::Model, "m2 must satisfy 1 <= m2 <= M1");
}

namespace {

void check_chain(const Mlp<double>& net, std::size_t in, std::size_t out,
                 const std::string& what) {
  if (net.layers.empty()) throw Error(ErrorKind::Model, what + " has no layers");
  std::size_t prev = in;
  for (const auto& l : net.layers) {
    if (l.w.rows() != prev || l.b.size() != l.w.cols())
      throw Error(ErrorKind::Model, what + " layer shapes do not chain");
    for (double v : l.w.values())
      if (!std::isfinite(v)) throw Error(ErrorKind::Model, what + " has non-finite weight");
    for (double v : l.b)
      if (!std::isfinite(v)) throw Error(ErrorKind::Model, what + " has non-finite bias");
    prev = l.w.cols();
  }
  if (prev != out) throw Error(ErrorKind::Model, what + " output width mismatch");
}

}  // namespace

void ModelParams::finalize() {
  dims.validate();
  const int nt = dims.ntypes;
  if (static_cast<int>(embed.size()) != nt * nt || static_cast<int>(fit.size()) != nt)
    throw Error(ErrorKind::Model, "network count does not match ntypes");
  for (int i = 0; i < nt * nt; ++i)
    check_chain(embed[i], 1, dims.m1(), "embedding net " + std::to_string(i));
  for (int i = 0; i < nt; ++i) {
    check_chain(fit[i], dims.descriptor_dim(), 1, "fitting net " + std::to_string(i));
    fit[i].linear_output = true;
  }
  for (auto* nets : {&embed, &fit})
    for (auto& net : *nets)
      for (auto& l : net.layers) l.wt = prepack_transpose(l.w);

  embed_f32.clear();
  fit_f32.clear();
  fit_first_w_half.clear();
  fit_first_wt_half.clear();
  for (const auto& n : embed) embed_f32.push_back(n.cast<float>());
  for (const auto& n : fit) {
    fit_f32.push_back(n.cast<float>());
    fit_first_w_half.push_back(quantize_fp16_copy(n.layers.front().w));
    fit_first_wt_half.push_back(quantize_fp16_copy(n.layers.front().wt));
  }
}

ModelParams init_params(std::uint64_t seed, const ModelDims& dims, double input_scale) {
  dims.validate();
  if (!(input_scale > 0.0) || !std::isfinite(input_scale))
    throw Error(ErrorKind::Model, "input_scale must be positive and finite");
  std::mt19937_64 gen(seed);
  auto uniform = [&gen] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
  auto symmetric = [&](double scale) { return (2.0 * uniform() - 1.0) * scale; };

  auto make_net = [&](int in, const std::vector<int>& widths, bool energy_head) {
    Mlp<double> net;
    int prev = in;
    std::vector<int> all = widths;
    if (energy_head) all.push_back(1);
    for (std::size_t li = 0; li < all.size(); ++li) {
      const int out = all[li];
      DenseLayer<double> l;
      l.w = Matrix<double>(prev, out);
      const double scale = std::sqrt(3.0 / prev);
      for (double& v : l.w.values()) v = symmetric(scale);
      l.b.resize(out);
      const bool head = energy_head && li + 1 == all.size();
      for (double& v : l.b) v = head ? -1.0 - uniform() : symmetric(0.1);
      net.layers.push_back(std::move(l));
      prev = out;
    }
    net.linear_output = energy_head;
    return net;
  };

  ModelParams p;
  p.dims = dims;
  p.input_scale = input_scale;
  for (int i = 0; i < dims.ntypes * dims.ntypes; ++i)
    p.embed.push_back(make_net(1, dims.embed, false));
  for (int i = 0; i < dims.ntypes; ++i)
    p.fit.push_back(make_net(dims.descriptor_dim(), dims.fit, true));
  p.finalize();
  return p;
}

// ---------------------------------------------------------------------------
// Parameter file

namespace {

constexpr const char* kMagic = "nnmd-params";
constexpr int kVersion = 1;

std::string format_real(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_tensor(std::ostream& out, const std::string& name, const Matrix<double>& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_real(m(i, j));
    }
    out << '\n';
  }
}

Matrix<double> bias_matrix(const std::vector<double>& b) {
  return Matrix<double>(1, b.size(), b);
}

std::string layer_name(const std::string& prefix, std::size_t l, char kind) {
  return prefix + "." + std::to_string(l) + "." + kind;
}

[[noreturn]] void parse_error(int line, const std::string& msg) {
  throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

template <typename T>
T parse_number(const std::string& tok, int line) {
  T v{};
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    parse_error(line, "malformed number '" + tok + "'");
  return v;
}

Mlp<double> assemble_net(std::map<std::string, Matrix<double>>& tensors,
                         const std::string& prefix) {
  Mlp<double> net;
  for (std::size_t l = 0;; ++l) {
    auto w = tensors.find(layer_name(prefix, l, 'w'));
    auto b = tensors.find(layer_name(prefix, l, 'b'));
    if (w == tensors.end() && b == tensors.end()) break;
    if (w == tensors.end() || b == tensors.end())
      throw Error(ErrorKind::Model, prefix + " layer " + std::to_string(l) +
                                        " needs both weight and bias");
    if (b->second.rows() != 1)
      throw Error(ErrorKind::Model, prefix + " bias must be a single row");
    DenseLayer<double> layer;
    layer.w = std::move(w->second);
    auto bv = b->second.values();
    layer.b.assign(bv.begin(), bv.end());
    tensors.erase(w);
    tensors.erase(b);
    net.layers.push_back(std::move(layer));
  }
  if (net.layers.empty()) throw Error(ErrorKind::Model, "missing network " + prefix);
  return net;
}

}  // namespace

void save_params(const ModelParams& p, std::ostream& out) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "ntypes " << p.dims.ntypes << '\n';
  out << "m2 " << p.dims.m2 << '\n';
  out << "input_scale " << format_real(p.input_scale) << '\n';
  const int nt = p.dims.ntypes;
  for (int ti = 0; ti < nt; ++ti)
    for (int tj = 0; tj < nt; ++tj) {
      const std::string prefix = "embed." + std::to_string(ti) + "." + std::to_string(tj);
      const auto& net = p.embedding(ti, tj);
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        write_tensor(out, layer_name(prefix, l, 'w'), net.layers[l].w);
        write_tensor(out, layer_name(prefix, l, 'b'), bias_matrix(net.layers[l].b));
      }
    }
  for (int ti = 0; ti < nt; ++ti) {
    const std::string prefix = "fit." + std::to_string(ti);
    const auto& net = p.fit[ti];
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      write_tensor(out, layer_name(prefix, l, 'w'), net.layers[l].w);
      write_tensor(out, layer_name(prefix, l, 'b'), bias_matrix(net.layers[l].b));
    }
  }
}

void save_params(const ModelParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  save_params(params, out);
}

ModelParams parse_params(std::istream& in) {
  std::string line;
  int lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };

  if (!next_line()) parse_error(1, "empty parameter file");
  auto head = split_ws(line);
  if (head.size() != 2 || head[0] != kMagic)
    parse_error(lineno, "expected '" + std::string(kMagic) + " <version>'");
  if (parse_number<int>(head[1], lineno) != kVersion)
    parse_error(lineno, "unsupported version " + head[1]);

  ModelParams p;
  auto read_scalar = [&](const char* key) {
    if (!next_line()) parse_error(lineno + 1, std::string("missing '") + key + "'");
    auto tok = split_ws(line);
    if (tok.size() != 2 || tok[0] != key)
      parse_error(lineno, std::string("expected '") + key + " <value>'");
    return parse_number<int>(tok[1], lineno);
  };
  p.dims.ntypes = read_scalar("ntypes");
  p.dims.m2 = read_scalar("m2");
  {
    if (!next_line()) parse_error(lineno + 1, "missing 'input_scale'");
    auto tok = split_ws(line);
    if (tok.size() != 2 || tok[0] != "input_scale")
      parse_error(lineno, "expected 'input_scale <value>'");
    p.input_scale = parse_number<double>(tok[1], lineno);
    if (!(p.input_scale > 0.0) || !std::isfinite(p.input_scale))
      parse_error(lineno, "input_scale must be positive and finite");
  }

  std::map<std::string, Matrix<double>> tensors;
  while (next_line()) {
    auto tok = split_ws(line);
    if (tok.size() != 3) parse_error(lineno, "expected '<name> <rows> <cols>'");
    const int header_line = lineno;
    const long rows = parse_number<long>(tok[1], lineno);
    const long cols = parse_number<long>(tok[2], lineno);
    if (rows < 1 || cols < 1) parse_error(lineno, "tensor dimensions must be >= 1");
    Matrix<double> m(rows, cols);
    for (long i = 0; i < rows; ++i) {
      if (!next_line()) parse_error(lineno + 1, "unexpected end of tensor " + tok[0]);
      auto vals = split_ws(line);
      if (static_cast<long>(vals.size()) != cols)
        parse_error(lineno, "expected " + std::to_string(cols) + " values");
      for (long j = 0; j < cols; ++j) {
        const double v = parse_number<double>(vals[j], lineno);
        if (!std::isfinite(v)) parse_error(lineno, "non-finite value");
        m(i, j) = v;
      }
    }
    if (!tensors.emplace(tok[0], std::move(m)).second)
      parse_error(header_line, "duplicate tensor " + tok[0]);
  }

  const int nt = p.dims.ntypes;
  if (nt < 1) throw Error(ErrorKind::Model, "ntypes must be >= 1");
  for (int ti = 0; ti < nt; ++ti)
    for (int tj = 0; tj < nt; ++tj)
      p.embed.push_back(assemble_net(tensors, "embed." + std::to_string(ti) + "." +
                                                  std::to_string(tj)));
  for (int ti = 0; ti < nt; ++ti)
    p.fit.push_back(assemble_net(tensors, "fit." + std::to_string(ti)));
  if (!tensors.empty())
    throw Error(ErrorKind::Model, "unknown tensor " + tensors.begin()->first);

  p.dims.embed.clear();
  for (const auto& l : p.embed.front().layers) p.dims.embed.push_back(static_cast<int>(l.w.cols()));
  p.dims.fit.clear();
  const auto& fl = p.fit.front().layers;
  for (std::size_t l = 0; l + 1 < fl.size(); ++l) p.dims.fit.push_back(static_cast<int>(fl[l].w.cols()));
  for (const auto& net : p.embed)
    for (std::size_t l = 0; l < net.layers.size(); ++l)
      if (net.layers.size() != p.dims.embed.size() ||
          static_cast<int>(net.layers[l].w.cols()) != p.dims.embed[l])
        throw Error(ErrorKind::Model, "embedding nets must share widths");
  for (const auto& net : p.fit)
    if (net.layers.size() != fl.size())
      throw Error(ErrorKind::Model, "fitting nets must share depth");
  p.finalize();
  return p;
}

ModelParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open parameter file " + path);
  return parse_params(in);
}

// ---------------------------------------------------------------------------
// Pipeline

SwitchValue switch_fn(double r, double rcs, double rc) {
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidInput, "switch_fn needs r > 0");
  if (r >= rc) return {0.0, 0.0};
  const double inv = 1.0 / r;
  if (r <= rcs) return {inv, -inv * inv};
  const double width = rc - rcs;
  const double x = (r - rcs) / width;
  const double x2 = x * x;
  const double u = x2 * x * (-6.0 * x2 + 15.0 * x - 10.0) + 1.0;
  const double du = -30.0 * x2 * (x - 1.0) * (x - 1.0);
  return {u * inv, -u * inv * inv + du * inv / width};
}

namespace {

void env_row(const Vec3& rv, const CutoffSpec& cutoff, double* row, SwitchValue& sw) {
  const double r = norm(rv);
  sw = switch_fn(r, cutoff.rcs, cutoff.rc);
  row[0] = sw.s;
  for (int k = 0; k < 3; ++k) row[k + 1] = sw.s * rv[k] / r;
}

}  // namespace

EnvMatrix build_env_matrix(std::size_t center, const NeighborList& list,
                           std::span<const Vec3> positions,
                           const CutoffSpec& cutoff) {
  EnvMatrix env;
  env.rows = Matrix<double>(list.padded_rows(), 4);
  const Vec3& xi = positions[list.center(center)];
  int offset = 0;
  SwitchValue sw;
  for (int t = 0; t < list.ntypes(); ++t) {
    env.row_offset.push_back(offset);
    const auto nb = list.neighbors(center, t);
    env.count.push_back(static_cast<int>(nb.size()));
    for (std::size_t j = 0; j < nb.size(); ++j)
      env_row(positions[nb[j]] - xi, cutoff, env.rows.row(offset + j), sw);
    offset += list.sel()[t];
  }
  return env;
}

namespace {

template <typename T>
struct MlpWork {
  std::vector<Matrix<T>> act;  // act[0] is the input batch
  Matrix<T> grad;
  Matrix<T> grad_next;
};

template <typename T>
void reshape(Matrix<T>& m, std::size_t rows, std::size_t cols) {
  if (m.rows() != rows || m.cols() != cols) m.resize(rows, cols);
}

template <typename T>
void mlp_forward(const Mlp<T>& net, MlpWork<T>& w, const Matrix<float>* half_first) {
  const std::size_t rows = w.act[0].rows();
  w.act.resize(net.layers.size() + 1);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    Matrix<T>& out = w.act[l + 1];
    reshape(out, rows, layer.w.cols());
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(layer.b.begin(), layer.b.end(), out.row(i));
    if (l == 0 && half_first)
      gemm_fp16(w.act[0], *half_first, out);
    else
      gemm_nn(w.act[l], layer.w, out);
    const bool linear = net.linear_output && l + 1 == net.layers.size();
    if (!linear)
      for (T& v : out.values()) v = std::tanh(v);
  }
}

// On entry w.grad holds dE/d(output); on exit dE/d(input).
template <typename T>
void mlp_backward(const Mlp<T>& net, MlpWork<T>& w, const Matrix<float>* half_first_t) {
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const auto& layer = net.layers[l];
    const bool linear = net.linear_output && l + 1 == net.layers.size();
    if (!linear) {
      const auto y = w.act[l + 1].values();
      auto g = w.grad.values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= T(1) - y[i] * y[i];
    }
    reshape(w.grad_next, w.grad.rows(), layer.w.rows());
    w.grad_next.fill(T(0));
    if (l == 0 && half_first_t)
      gemm_fp16(w.grad, *half_first_t, w.grad_next);
    else
      gemm_nn(w.grad, layer.wt, w.grad_next);
    std::swap(w.grad, w.grad_next);
  }
}

}  // namespace

Matrix<double> embedding_forward(std::span<const double> s_column,
                                 const ModelParams& params, int ti, int tj) {
  MlpWork<double> w;
  w.act.resize(1);
  w.act[0] = Matrix<double>(s_column.size(), 1,
                            std::vector<double>(s_column.begin(), s_column.end()));
  mlp_forward(params.embedding(ti, tj), w, nullptr);
  return w.act.back();
}

std::vector<double> descriptor(const EnvMatrix& env, const Matrix<double>& g, int m2) {
  const std::size_t n = env.rows.rows();
  const std::size_t m1 = g.cols();
  if (g.rows() != n) throw Error(ErrorKind::Dimension, "G and R row counts differ");
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix<double> a(m1, 4);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < m1; ++p)
      for (int k = 0; k < 4; ++k) a(p, k) += g(j, p) * env.rows(j, k);
  for (double& v : a.values()) v *= inv_n;
  std::vector<double> d(m1 * m2);
  for (std::size_t p = 0; p < m1; ++p)
    for (int q = 0; q < m2; ++q) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += a(p, k) * a(q, k);
      d[p * m2 + q] = s;
    }
  return d;
}

// ---------------------------------------------------------------------------
// Evaluator

struct DeepPotential::Workspace {
  Matrix<double> r;       // n x 4, real rows only
  std::vector<SwitchValue> sw;
  std::vector<Vec3> rvec;
  std::vector<double> rlen;
  Matrix<double> g;       // n x M1
  Matrix<double> dg;      // n x M1
  Matrix<double> dr;      // n x 4
  Matrix<double> a, da;   // M1 x 4
  std::vector<double> d, dd;
  std::vector<MlpWork<double>> emb_d;
  std::vector<MlpWork<float>> emb_f;
  MlpWork<double> fit_d;
  MlpWork<float> fit_f;
  std::vector<int> group_offset;
};

DeepPotential::DeepPotential(ModelParams params, CutoffSpec cutoff)
    : params_(std::move(params)), cutoff_(cutoff), work_(std::make_unique<Workspace>()) {
  cutoff_.validate();
  const int nt = params_.dims.ntypes;
  work_->emb_d.resize(nt);
  work_->emb_f.resize(nt);
  for (auto& w : work_->emb_d) w.act.resize(1);
  for (auto& w : work_->emb_f) w.act.resize(1);
  work_->fit_d.act.resize(1);
  work_->fit_f.act.resize(1);
  const std::size_t m1 = params_.dims.m1();
  work_->a = Matrix<double>(m1, 4);
  work_->da = Matrix<double>(m1, 4);
  work_->d.resize(params_.dims.descriptor_dim());
  work_->dd.resize(params_.dims.descriptor_dim());
}

DeepPotential::~DeepPotential() = default;
DeepPotential::DeepPotential(DeepPotential&&) noexcept = default;
DeepPotential& DeepPotential::operator=(DeepPotential&&) noexcept = default;

namespace {

template <typename TE>
MlpWork<TE>& emb_work(std::vector<MlpWork<double>>& d, std::vector<MlpWork<float>>& f, int t) {
  if constexpr (std::is_same_v<TE, double>) {
    (void)f;
    return d[t];
  } else {
    (void)d;
    return f[t];
  }
}

template <typename TE>
const Mlp<TE>& emb_net(const ModelParams& p, int ti, int tj) {
  if constexpr (std::is_same_v<TE, double>)
    return p.embedding(ti, tj);
  else
    return p.embed_f32[ti * p.dims.ntypes + tj];
}

template <typename TF>
const Mlp<TF>& fit_net(const ModelParams& p, int ti) {
  if constexpr (std::is_same_v<TF, double>)
    return p.fit[ti];
  else
    return p.fit_f32[ti];
}

}  // namespace

namespace detail_eval {

// Forward through environment matrix, embedding nets and descriptor.
template <typename TE, typename Work>
void forward_descriptor(const ModelParams& params, const CutoffSpec& cutoff,
                        std::span<const Vec3> positions, std::span<const int> types,
                        const NeighborList& list, std::size_t c, Work& w) {
  const int nt = params.dims.ntypes;
  const int ci = list.center(c);
  const int ti = types[ci];
  if (ti < 0 || ti >= nt) throw Error(ErrorKind::Model, "centre type out of range");
  const auto nb = list.neighbors(c);
  const std::size_t n = nb.size();
  const std::size_t m1 = params.dims.m1();
  const int m2 = params.dims.m2;

  reshape(w.r, n, 4);
  w.sw.resize(n);
  w.rvec.resize(n);
  w.rlen.resize(n);
  const Vec3& xi = positions[ci];
  for (std::size_t j = 0; j < n; ++j) {
    w.rvec[j] = positions[nb[j]] - xi;
    w.rlen[j] = norm(w.rvec[j]);
    env_row(w.rvec[j], cutoff, w.r.row(j), w.sw[j]);
  }

  reshape(w.g, n, m1);
  w.group_offset.assign(nt + 1, 0);
  for (int t = 0; t < nt; ++t)
    w.group_offset[t + 1] = w.group_offset[t] + static_cast<int>(list.neighbors(c, t).size());
  for (int t = 0; t < nt; ++t) {
    const int o = w.group_offset[t];
    const int cnt = w.group_offset[t + 1] - o;
    if (cnt == 0) continue;
    auto& ew = emb_work<TE>(w.emb_d, w.emb_f, t);
    reshape(ew.act[0], cnt, 1);
    for (int j = 0; j < cnt; ++j) ew.act[0](j, 0) = static_cast<TE>(w.r(o + j, 0));
    mlp_forward(emb_net<TE>(params, ti, t), ew, nullptr);
    const auto& out = ew.act.back();
    for (int j = 0; j < cnt; ++j)
      for (std::size_t p = 0; p < m1; ++p) w.g(o + j, p) = static_cast<double>(out(j, p));
  }

  const double inv_n = 1.0 / static_cast<double>(list.padded_rows());
  w.a.fill(0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double* rj = w.r.row(j);
    const double* gj = w.g.row(j);
    for (std::size_t p = 0; p < m1; ++p)
      for (int k = 0; k < 4; ++k) w.a(p, k) += gj[p] * rj[k];
  }
  for (double& v : w.a.values()) v *= inv_n;
  for (std::size_t p = 0; p < m1; ++p)
    for (int q = 0; q < m2; ++q) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += w.a(p, k) * w.a(q, k);
      w.d[p * m2 + q] = s;
    }
}

template <typename TE, typename TF, typename Work>
void evaluate(const ModelParams& params, const CutoffSpec& cutoff,
              std::span<const Vec3> positions, std::span<const int> types,
              const NeighborList& list, std::size_t c, bool half_first, Work& w,
              CenterTerms& out) {
  forward_descriptor<TE>(params, cutoff, positions, types, list, c, w);
  const int nt = params.dims.ntypes;
  const int ti = types[list.center(c)];
  const std::size_t n = list.neighbors(c).size();
  const std::size_t m1 = params.dims.m1();
  const int m2 = params.dims.m2;
  const double inv_n = 1.0 / static_cast<double>(list.padded_rows());

  // Fitting net.
  MlpWork<TF>* fw;
  if constexpr (std::is_same_v<TF, double>)
    fw = &w.fit_d;
  else
    fw = &w.fit_f;
  const std::size_t dim = params.dims.descriptor_dim();
  reshape(fw->act[0], 1, dim);
  for (std::size_t i = 0; i < dim; ++i) fw->act[0](0, i) = static_cast<TF>(w.d[i] * params.input_scale);
  const Matrix<float>* hw = half_first ? &params.fit_first_w_half[ti] : nullptr;
  const Matrix<float>* hwt = half_first ? &params.fit_first_wt_half[ti] : nullptr;
  const auto& fnet = fit_net<TF>(params, ti);
  mlp_forward(fnet, *fw, hw);
  out.energy = static_cast<double>(fw->act.back()(0, 0));

  reshape(fw->grad, 1, 1);
  fw->grad(0, 0) = TF(1);
  mlp_backward(fnet, *fw, hwt);
  for (std::size_t i = 0; i < dim; ++i) w.dd[i] = static_cast<double>(fw->grad(0, i)) * params.input_scale;

  // Descriptor backward: dA = dD A2 + [p < M2] dD^T A.
  w.da.fill(0.0);
  for (std::size_t p = 0; p < m1; ++p)
    for (int q = 0; q < m2; ++q) {
      const double g = w.dd[p * m2 + q];
      for (int k = 0; k < 4; ++k) {
        w.da(p, k) += g * w.a(q, k);
        w.da(q, k) += g * w.a(p, k);
      }
    }

  reshape(w.dg, n, m1);
  reshape(w.dr, n, 4);
  for (std::size_t j = 0; j < n; ++j) {
    const double* rj = w.r.row(j);
    const double* gj = w.g.row(j);
    for (std::size_t p = 0; p < m1; ++p) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += w.da(p, k) * rj[k];
      w.dg(j, p) = s * inv_n;
    }
    for (int k = 0; k < 4; ++k) {
      double s = 0.0;
      for (std::size_t p = 0; p < m1; ++p) s += w.da(p, k) * gj[p];
      w.dr(j, k) = s * inv_n;
    }
  }

  // Embedding backward adds dE/ds through the net input.
  for (int t = 0; t < nt; ++t) {
    const int o = w.group_offset[t];
    const int cnt = w.group_offset[t + 1] - o;
    if (cnt == 0) continue;
    auto& ew = emb_work<TE>(w.emb_d, w.emb_f, t);
    reshape(ew.grad, cnt, m1);
    for (int j = 0; j < cnt; ++j)
      for (std::size_t p = 0; p < m1; ++p) ew.grad(j, p) = static_cast<TE>(w.dg(o + j, p));
    mlp_backward(emb_net<TE>(params, ti, t), ew, nullptr);
    for (int j = 0; j < cnt; ++j) w.dr(o + j, 0) += static_cast<double>(ew.grad(j, 0));
  }

  // Chain through R_j = s(r) (1, x/r, y/r, z/r).
  out.grad.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const SwitchValue& sw = w.sw[j];
    Vec3 g{0.0, 0.0, 0.0};
    if (sw.s != 0.0 || sw.ds_dr != 0.0) {
      const Vec3& x = w.rvec[j];
      const double r = w.rlen[j];
      const double inv_r = 1.0 / r;
      const double* dr = w.dr.row(j);
      double proj = 0.0;  // sum_k dR_k x_k / r
      for (int k = 0; k < 3; ++k) proj += dr[k + 1] * x[k] * inv_r;
      for (int m = 0; m < 3; ++m) {
        const double um = x[m] * inv_r;
        g[m] = dr[0] * sw.ds_dr * um + sw.ds_dr * um * proj +
               sw.s * inv_r * (dr[m + 1] - um * proj);
      }
    }
    out.grad[j] = g;
  }
}

}  // namespace detail_eval

void DeepPotential::evaluate(std::span<const Vec3> positions, std::span<const int> types,
                             const NeighborList& list, std::size_t center,
                             CenterTerms& out) {
  if (list.ntypes() != params_.dims.ntypes)
    throw Error(ErrorKind::Model, "neighbor list type count does not match model");
  switch (params_.precision) {
    case PrecisionMode::Double:
      detail_eval::evaluate<double, double>(params_, cutoff_, positions, types, list,
                                            center, false, *work_, out);
      break;
    case PrecisionMode::MixFp32:
      detail_eval::evaluate<float, float>(params_, cutoff_, positions, types, list,
                                          center, false, *work_, out);
      break;
    case PrecisionMode::MixFp16:
      detail_eval::evaluate<float, float>(params_, cutoff_, positions, types, list,
                                          center, true, *work_, out);
      break;
  }
}

std::vector<double> DeepPotential::descriptor_of(std::span<const Vec3> positions,
                                                 std::span<const int> types,
                                                 const NeighborList& list,
                                                 std::size_t center) {
  if (params_.precision == PrecisionMode::Double)
    detail_eval::forward_descriptor<double>(params_, cutoff_, positions, types, list,
                                            center, *work_);
  else
    detail_eval::forward_descriptor<float>(params_, cutoff_, positions, types, list,
                                           center, *work_);
  return work_->d;
}

ForceResult compute_energy_forces(DeepPotential& potential,
                                  std::span<const Vec3> positions,
                                  std::span<const int> types,
                                  const NeighborList& list) {
  ForceResult res;
  res.forces.assign(positions.size(), Vec3{0.0, 0.0, 0.0});
  res.atom_energy.resize(list.num_centers());
  CenterTerms terms;
  for (std::size_t c = 0; c < list.num_centers(); ++c) {
    potential.evaluate(positions, types, list, c, terms);
    res.atom_energy[c] = terms.energy;
    res.energy += terms.energy;
    const auto nb = list.neighbors(c);
    Vec3 self{0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < nb.size(); ++j) {
      self += terms.grad[j];
      res.forces[nb[j]] += -1.0 * terms.grad[j];
    }
    res.forces[list.center(c)] += self;
  }
  return res;
}

}  // namespace nnmd
