#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nnmd/neighbor.hpp"
#include "nnmd/tsgemm.hpp"
#include "nnmd/types.hpp"

namespace nnmd {

// ---------------------------------------------------------------------------
// Networks

template <typename T>
struct DenseLayer {
  Matrix<T> w;        // fan_in x fan_out
  std::vector<T> b;   // fan_out
  Matrix<T> wt;       // fan_out x fan_in, packed once at load
};

/// Fully connected net; tanh after every layer except, when `linear_output`
/// is set, the last one.
template <typename T>
struct Mlp {
  std::vector<DenseLayer<T>> layers;
  bool linear_output = false;

  std::size_t input_dim() const { return layers.front().w.rows(); }
  std::size_t output_dim() const { return layers.back().w.cols(); }

  template <typename U>
  Mlp<U> cast() const;
};

struct ModelDims {
  int ntypes = 1;
  std::vector<int> embed{8, 16, 16};  // last entry is M1
  int m2 = 4;
  std::vector<int> fit{240, 240, 240};

  int m1() const { return embed.back(); }
  int descriptor_dim() const { return m1() * m2; }
  void validate() const;
};

/// Weights of the per-type-pair embedding nets and per-type fitting nets,
/// plus reduced-precision mirrors built once by `finalize()`.
struct ModelParams {
  ModelDims dims;
  PrecisionMode precision = PrecisionMode::Double;
  /// Multiplies the descriptor before the fitting net.
  double input_scale = 1.0;

  std::vector<Mlp<double>> embed;  // index: center_type * ntypes + neighbor_type
  std::vector<Mlp<double>> fit;    // index: center_type

  std::vector<Mlp<float>> embed_f32;
  std::vector<Mlp<float>> fit_f32;
  std::vector<Matrix<float>> fit_first_w_half;   // per center type
  std::vector<Matrix<float>> fit_first_wt_half;  // per center type

  const Mlp<double>& embedding(int ti, int tj) const {
    return embed[ti * dims.ntypes + tj];
  }
  /// Validates shapes and rebuilds transposes and mirrors.
  void finalize();
};

inline constexpr double kDefaultInputScale = 1000.0;

ModelParams init_params(std::uint64_t seed, const ModelDims& dims,
                        double input_scale = kDefaultInputScale);

/// Text format:
///   nnmd-params 1
///   ntypes <n>
///   m2 <m2>
///   input_scale <value>
///   <tensor name> <rows> <cols>
///   <rows lines of cols decimal values>
///   ...
ModelParams load_params(const std::string& path);
ModelParams parse_params(std::istream& in);
void save_params(const ModelParams& params, std::ostream& out);
void save_params(const ModelParams& params, const std::string& path);

// ---------------------------------------------------------------------------
// Pipeline pieces

struct SwitchValue {
  double s = 0.0;
  double ds_dr = 0.0;
};

/// 1/r below rcs, 1/r * u(x) with u(x) = x^3(-6x^2+15x-10)+1 on (rcs, rc),
/// zero at and beyond rc.
SwitchValue switch_fn(double r, double rcs, double rc);

/// Padded environment matrix: group t occupies rows
/// [row_offset[t], row_offset[t] + sel[t]); real neighbours first.
struct EnvMatrix {
  Matrix<double> rows;            // n_pad x 4
  std::vector<int> row_offset;    // per type
  std::vector<int> count;         // real rows per type
  int padded_rows() const { return static_cast<int>(rows.rows()); }
};

EnvMatrix build_env_matrix(std::size_t center, const NeighborList& list,
                           std::span<const Vec3> positions,
                           const CutoffSpec& cutoff);

/// G rows for a column of s values through embedding net (ti, tj).
Matrix<double> embedding_forward(std::span<const double> s_column,
                                 const ModelParams& params, int ti, int tj);

/// D = (G^T R)(R^T G2) / n_pad^2, flattened row-major (M1 x M2).
std::vector<double> descriptor(const EnvMatrix& env, const Matrix<double>& g,
                               int m2);

// ---------------------------------------------------------------------------
// Energy and forces

struct CenterTerms {
  double energy = 0.0;
  /// dE_i / d(x_j - x_i) for each neighbour slot of the centre.
  std::vector<Vec3> grad;
};

struct ForceResult {
  double energy = 0.0;
  std::vector<double> atom_energy;  // per centre, list order
  std::vector<Vec3> forces;         // per store atom (locals and ghosts)
};

/// Evaluator owning its scratch buffers; not shareable across threads.
class DeepPotential {
 public:
  DeepPotential(ModelParams params, CutoffSpec cutoff);
  ~DeepPotential();
  DeepPotential(DeepPotential&&) noexcept;
  DeepPotential& operator=(DeepPotential&&) noexcept;

  const ModelParams& params() const noexcept { return params_; }
  const CutoffSpec& cutoff() const noexcept { return cutoff_; }
  void set_precision(PrecisionMode mode) { params_.precision = mode; }

  void evaluate(std::span<const Vec3> positions, std::span<const int> types,
                const NeighborList& list, std::size_t center,
                CenterTerms& out);

  std::vector<double> descriptor_of(std::span<const Vec3> positions,
                                    std::span<const int> types,
                                    const NeighborList& list,
                                    std::size_t center);

 private:
  struct Workspace;
  ModelParams params_;
  CutoffSpec cutoff_;
  std::unique_ptr<Workspace> work_;
};

/// Energies and forces for every centre in the list; ghost forces are left
/// in `forces` for reverse communication.
ForceResult compute_energy_forces(DeepPotential& potential,
                                  std::span<const Vec3> positions,
                                  std::span<const int> types,
                                  const NeighborList& list);

}  // namespace nnmd
