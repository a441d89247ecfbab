#include "radar_mrf/kde.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

// The 32-byte vectors below never cross a non-inlined boundary.
#pragma GCC diagnostic ignored "-Wpsabi"

namespace radar_mrf {

namespace {

struct KernelPlan {
  std::vector<std::size_t> columns;
  std::vector<double> inv_scale;
  double radius = 1.0;
  double norm = 1.0;  // R^3
};

KernelPlan make_plan(const FeatureSchema& schema, const KdeConfig& cfg) {
  cfg.validate();
  KernelPlan plan;
  plan.radius = cfg.radius;
  plan.norm = cfg.radius * cfg.radius * cfg.radius;
  for (std::size_t d = 0; d < cfg.kernel_dims.size(); ++d) {
    plan.columns.push_back(schema.require(cfg.kernel_dims[d]));
    const double scale = cfg.dim_bandwidths.empty() ? cfg.radius : cfg.dim_bandwidths[d];
    plan.inv_scale.push_back(1.0 / scale);
  }
  return plan;
}

// exp(x) for x in [-kFastExpFloor, 0], within a few ulp; branch-free so the
// neighbor loop vectorizes. Callers route smaller arguments to std::exp.
constexpr double kFastExpFloor = 700.0;

[[gnu::always_inline]] inline double fast_exp_neg(double x) {
  constexpr double kLog2e = 1.4426950408889634;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  constexpr double kShift = 6755399441055744.0;  // 1.5 * 2^52
  const double kd = x * kLog2e + kShift;
  const double k = kd - kShift;
  const double r = (x - k * kLn2Hi) - k * kLn2Lo;
  // Taylor to r^13; |r| <= ln2 / 2 keeps the remainder below 1e-17.
  double p = 1.0 / 6227020800.0;
  p = p * r + 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  const auto bits = (std::bit_cast<std::uint64_t>(kd) + 1023u) << 52;
  return p * std::bit_cast<double>(bits);
}

constexpr std::size_t kNoSelf = static_cast<std::size_t>(-1);

struct RowSum {
  double sum = 0.0;
  double m = 0.0;    // accepted neighbors
  double far = 0.0;  // accepted neighbors whose exponent exceeds the fast range
};

// Points in cell order, structure-of-arrays: gate x, y, z and the scaled
// kernel columns. Each array carries kLanes trailing entries that fail the
// gate, so vector loads may run past the last point.
struct Columns {
  std::array<const double*, 3> gate{};
  std::vector<const double*> col;
};

// Query point: gate coordinates and scaled kernel values.
struct Query {
  std::array<double, 3> gate{};
  std::array<double, 8> col{};
};

// Four-lane kernel in GCC vector extensions: SSE2 runs it as two halves, the
// AVX2/FMA variant natively. Within one machine every thread takes the same
// path, so results do not depend on the thread count.
constexpr std::size_t kLanes = 4;
using V4d = double __attribute__((vector_size(32)));
using V4i = std::int64_t __attribute__((vector_size(32)));

[[gnu::always_inline]] inline V4d load4(const double* p) {
  V4d v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

// fast_exp_neg, four lanes at a time.
[[gnu::always_inline]] inline V4d fast_exp_neg4(V4d x) {
  const V4d shift = V4d{} + 6755399441055744.0;
  const V4d kd = x * 1.4426950408889634 + shift;
  const V4d k = kd - shift;
  const V4d r = (x - k * 6.93147180369123816490e-01) - k * 1.90821492927058770002e-10;
  V4d p = V4d{} + 1.0 / 6227020800.0;
  p = p * r + 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  const V4i bits = ((V4i)kd + 1023) << 52;  // vector casts reinterpret bits
  return p * (V4d)bits;
}

// Block arrays are padded to a multiple of kLanes with gate values of +inf,
// which fail the gate.
// Terms of q against positions [lo, hi), skipping `self`. The loop runs over
// whole vectors from lo rounded down; a lane mask trims both ends.
template <std::size_t D>
[[gnu::always_inline]] inline RowSum row_terms_fixed(const Columns& b, const Query& q, double r, std::size_t self,
                                                     std::size_t lo, std::size_t hi) {
  std::array<const double*, D> c;
  for (std::size_t d = 0; d < D; ++d) c[d] = b.col[d];
  const V4d xi = V4d{} + q.gate[0], yi = V4d{} + q.gate[1], zi = V4d{} + q.gate[2];
  const V4d rv = V4d{} + r;
  const V4d floor = V4d{} + kFastExpFloor;
  const V4i self_v = V4i{} + static_cast<std::int64_t>(self);
  const V4i abs_mask = V4i{} + 0x7FFFFFFFFFFFFFFF;
  const std::size_t start = lo / kLanes * kLanes;
  const auto s0 = static_cast<std::int64_t>(start);
  V4i lane = V4i{s0, s0 + 1, s0 + 2, s0 + 3};
  const V4i lo_v = V4i{} + static_cast<std::int64_t>(lo), hi_v = V4i{} + static_cast<std::int64_t>(hi);
  V4d sum{}, m{}, far{};
  auto vabs = [&](V4d v) { return (V4d)((V4i)v & abs_mask); };
  for (std::size_t j = start; j < hi; j += kLanes, lane += static_cast<std::int64_t>(kLanes)) {
    const V4i inside = (vabs(xi - load4(b.gate[0] + j)) <= rv) & (vabs(yi - load4(b.gate[1] + j)) <= rv) &
                       (vabs(zi - load4(b.gate[2] + j)) <= rv) & (lane != self_v) & (lane >= lo_v) & (lane < hi_v);
    V4d expo{};
    for (std::size_t d = 0; d < D; ++d) {
      const V4d u = q.col[d] - load4(c[d] + j);
      expo += u * u;
    }
    const V4d one = V4d{} + 1.0;
    const V4d zero{};
    const V4d w = inside ? one : zero;
    sum += w * fast_exp_neg4(-(expo < floor ? expo : floor));
    m += w;
    far += expo > floor ? w : zero;
  }
  return {((sum[0] + sum[1]) + sum[2]) + sum[3], ((m[0] + m[1]) + m[2]) + m[3], ((far[0] + far[1]) + far[2]) + far[3]};
}

// Any dimension count, optionally with the exact exponential.
template <bool Exact>
RowSum row_terms_scalar(const Columns& b, const Query& q, double r, std::size_t self, std::size_t lo,
                        std::size_t hi) {
  RowSum out;
  const std::size_t dims = b.col.size();
  for (std::size_t j = lo; j < hi; ++j) {
    if (std::abs(q.gate[0] - b.gate[0][j]) > r || std::abs(q.gate[1] - b.gate[1][j]) > r ||
        std::abs(q.gate[2] - b.gate[2][j]) > r || j == self) {
      continue;
    }
    double expo = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      const double u = q.col[d] - b.col[d][j];
      expo += u * u;
    }
    out.sum += Exact ? std::exp(-expo) : fast_exp_neg(-std::min(expo, kFastExpFloor));
    out.m += 1.0;
    out.far += expo > kFastExpFloor ? 1.0 : 0.0;
  }
  return out;
}

using Runs = std::array<std::pair<std::size_t, std::size_t>, 3>;

// Sums for every point of one home cell, positions [begin, end), against the
// three neighbor runs.
template <std::size_t D>
[[gnu::always_inline]] inline void cell_terms_fixed(const Columns& b, const Runs& runs, double r, bool exclude_self,
                                                    std::size_t begin, std::size_t end, RowSum* out) {
  for (std::size_t i = begin; i < end; ++i) {
    Query q;
    q.gate = {b.gate[0][i], b.gate[1][i], b.gate[2][i]};
    for (std::size_t d = 0; d < D; ++d) q.col[d] = b.col[d][i];
    const std::size_t self = exclude_self ? i : kNoSelf;
    RowSum acc;
    for (const auto& [lo, hi] : runs) {
      if (lo == hi) continue;
      const RowSum part = row_terms_fixed<D>(b, q, r, self, lo, hi);
      acc.sum += part.sum;
      acc.m += part.m;
      acc.far += part.far;
    }
    out[i - begin] = acc;
  }
}

void cell_terms_generic(const Columns& b, const Runs& runs, double r, bool exclude_self, std::size_t begin,
                        std::size_t end, RowSum* out) {
  const std::size_t dims = b.col.size();
  for (std::size_t i = begin; i < end; ++i) {
    Query q;
    q.gate = {b.gate[0][i], b.gate[1][i], b.gate[2][i]};
    for (std::size_t d = 0; d < dims; ++d) q.col[d] = b.col[d][i];
    const std::size_t self = exclude_self ? i : kNoSelf;
    RowSum acc;
    for (const auto& [lo, hi] : runs) {
      if (lo == hi) continue;
      const RowSum part = row_terms_scalar<false>(b, q, r, self, lo, hi);
      acc.sum += part.sum;
      acc.m += part.m;
      acc.far += part.far;
    }
    out[i - begin] = acc;
  }
}

using CellTermsFn = void (*)(const Columns&, const Runs&, double, bool, std::size_t, std::size_t, RowSum*);

template <std::size_t D>
void cell_terms_base(const Columns& b, const Runs& runs, double r, bool exclude_self, std::size_t begin,
                     std::size_t end, RowSum* out) {
  cell_terms_fixed<D>(b, runs, r, exclude_self, begin, end, out);
}

#if defined(__x86_64__) && defined(__GNUC__) && !defined(__clang__)
// AVX2 with fused multiply-add, picked at run time when the CPU has both.
template <std::size_t D>
__attribute__((target("avx2,fma"))) void cell_terms_avx2(const Columns& b, const Runs& runs, double r,
                                                          bool exclude_self, std::size_t begin, std::size_t end,
                                                          RowSum* out) {
  cell_terms_fixed<D>(b, runs, r, exclude_self, begin, end, out);
}

bool has_avx2_fma() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

CellTermsFn pick_cell_terms(std::size_t dims) {
#if defined(__x86_64__) && defined(__GNUC__) && !defined(__clang__)
  static const bool fast = has_avx2_fma();
  if (fast && dims == 3) return cell_terms_avx2<3>;
  if (fast && dims == 4) return cell_terms_avx2<4>;
#endif
  if (dims == 3) return cell_terms_base<3>;
  if (dims == 4) return cell_terms_base<4>;
  return cell_terms_generic;
}

std::int64_t floor_div(double v, double c) { return static_cast<std::int64_t>(std::floor(v / c)); }

}  // namespace

void KdeConfig::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ArgumentError("KDE radius must be positive");
  if (!(epsilon > 0.0)) throw ArgumentError("KDE epsilon must be positive");
  for (const char* axis : {"x", "y", "z"}) {
    if (std::find(kernel_dims.begin(), kernel_dims.end(), axis) == kernel_dims.end()) {
      throw ArgumentError(std::string("KDE kernel_dims must contain ") + axis);
    }
  }
  if (!dim_bandwidths.empty()) {
    if (dim_bandwidths.size() != kernel_dims.size()) {
      throw ArgumentError("dim_bandwidths must match kernel_dims in length");
    }
    for (double b : dim_bandwidths) {
      if (!(b > 0.0)) throw ArgumentError("dim_bandwidths must be positive");
    }
  }
}

std::vector<std::string> default_kernel_dims(const FeatureSchema& schema, std::string_view doppler_field) {
  std::vector<std::string> dims{"x", "y", "z"};
  if (!doppler_field.empty() && schema.index_of(doppler_field)) dims.emplace_back(doppler_field);
  return dims;
}

std::size_t CellKeyHash::operator()(const CellKey& k) const noexcept {
  auto h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ull;
  h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
  h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
  return static_cast<std::size_t>(h);
}

CellKey GridIndex::key_of(double x, double y, double z) const {
  return {floor_div(x, cell_size_), floor_div(y, cell_size_), floor_div(z, cell_size_)};
}

std::span<const std::uint32_t> GridIndex::cell(const CellKey& key) const {
  auto it = slots_.find(key);
  if (it == slots_.end()) return {};
  return cell_at(it->second);
}

std::size_t GridIndex::lower_slot(const CellKey& key) const {
  return static_cast<std::size_t>(std::lower_bound(keys_.begin(), keys_.end(), key) - keys_.begin());
}

GridIndex build_grid_index(const PointCloud& pc, double cell_size) {
  if (!(cell_size > 0.0)) throw ArgumentError("grid cell size must be positive");
  GridIndex g;
  g.cell_size_ = cell_size;
  const std::size_t n = pc.size();
  std::vector<CellKey> point_keys(n);
  for (std::size_t i = 0; i < n; ++i) point_keys[i] = g.key_of(pc.x(i), pc.y(i), pc.z(i));

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return point_keys[a] < point_keys[b]; });

  g.indices_ = order;
  g.offsets_.assign(1, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const CellKey& key = point_keys[order[k]];
    if (g.keys_.empty() || !(g.keys_.back() == key)) {
      if (!g.keys_.empty()) g.offsets_.push_back(static_cast<std::uint32_t>(k));
      g.slots_.emplace(key, static_cast<std::uint32_t>(g.keys_.size()));
      g.keys_.push_back(key);
    }
  }
  if (n > 0) g.offsets_.push_back(static_cast<std::uint32_t>(n));
  return g;
}

std::vector<double> kde_densities(const PointCloud& pc, const KdeConfig& cfg) {
  const KernelPlan plan = make_plan(pc.schema(), cfg);
  const std::size_t n = pc.size();
  std::vector<double> rho(n, 0.0);
  if (n == 0) return rho;

  // Cells slightly wider than R keep every Chebyshev-R neighbor within the
  // 27-cell block even when x/c rounds up across an integer.
  const GridIndex grid = build_grid_index(pc, cfg.radius * (1.0 + 1e-9));
  const double r = plan.radius;
  const std::size_t dims = plan.columns.size();
  const auto& values = pc.values();
  const std::size_t stride = pc.channels();

  // Kernel columns gathered in cell order and scaled, so neighbor cells are
  // contiguous runs.
  if (dims > Query{}.col.size()) throw ArgumentError("at most 8 kernel dimensions are supported");
  const auto& order = grid.point_order();
  constexpr double kOut = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> gate(3, std::vector<double>(n + kLanes, kOut));
  std::vector<std::vector<double>> cols(dims, std::vector<double>(n + kLanes, 0.0));
  for (std::size_t k = 0; k < n; ++k) {
    const double* row = values.data() + order[k] * stride;
    for (std::size_t a = 0; a < 3; ++a) gate[a][k] = row[a];
    for (std::size_t d = 0; d < dims; ++d) cols[d][k] = row[plan.columns[d]] * plan.inv_scale[d];
  }
  Columns all;
  all.gate = {gate[0].data(), gate[1].data(), gate[2].data()};
  for (const auto& c : cols) all.col.push_back(c.data());

  const CellTermsFn cell_terms = pick_cell_terms(dims);
  const auto cells = static_cast<std::int64_t>(grid.cell_count());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t slot = 0; slot < cells; ++slot) {
    const auto s = static_cast<std::size_t>(slot);
    const CellKey home = grid.keys()[s];
    // Keys are ordered (x, y, z), so for each dx the cells from (y-1, z-1) to
    // (y+1, z+1) form one run. It may hold extra cells; the gate drops them.
    Runs runs;
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      const std::size_t lo = grid.lower_slot({home.x + dx, home.y - 1, home.z - 1});
      const std::size_t hi = grid.lower_slot({home.x + dx, home.y + 1, home.z + 2});
      runs[static_cast<std::size_t>(dx + 1)] = {grid.offset(lo), grid.offset(std::max(lo, hi))};
    }
    const std::size_t begin = grid.offset(s), end = grid.offset(s + 1);
    std::vector<RowSum> sums(end - begin);
    cell_terms(all, runs, r, cfg.exclude_self, begin, end, sums.data());
    for (std::size_t i = begin; i < end; ++i) {
      RowSum acc = sums[i - begin];
      if (acc.far > 0.0) {
        // Terms outside the fast range: redo this point exactly.
        Query q;
        q.gate = {all.gate[0][i], all.gate[1][i], all.gate[2][i]};
        for (std::size_t d = 0; d < dims; ++d) q.col[d] = all.col[d][i];
        const std::size_t self = cfg.exclude_self ? i : kNoSelf;
        acc = {};
        for (const auto& [lo, hi] : runs) {
          const RowSum part = row_terms_scalar<true>(all, q, r, self, lo, hi);
          acc.sum += part.sum;
          acc.m += part.m;
        }
      }
      rho[order[i]] = acc.m == 0 ? 0.0 : acc.sum / (acc.m * plan.norm);
    }
  }
  return rho;
}

std::vector<double> kde_bruteforce(const PointCloud& pc, const KdeConfig& cfg) {
  const KernelPlan plan = make_plan(pc.schema(), cfg);
  const std::size_t n = pc.size();
  std::vector<double> rho(n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    double sum = 0.0;
    std::size_t m = 0;
    for (std::size_t q = 0; q < n; ++q) {
      if (cfg.exclude_self && q == p) continue;
      const bool inside = std::abs(pc.x(p) - pc.x(q)) <= plan.radius && std::abs(pc.y(p) - pc.y(q)) <= plan.radius &&
                          std::abs(pc.z(p) - pc.z(q)) <= plan.radius;
      if (!inside) continue;
      double product = 1.0;
      for (std::size_t d = 0; d < plan.columns.size(); ++d) {
        const double u = (pc.at(p, plan.columns[d]) - pc.at(q, plan.columns[d])) * plan.inv_scale[d];
        product *= std::exp(-u * u);
      }
      sum += product;
      ++m;
    }
    rho[p] = m == 0 ? 0.0 : sum / (static_cast<double>(m) * plan.norm);
  }
  return rho;
}

std::vector<double> normalize_densities(std::span<const double> raw, double epsilon) {
  if (raw.empty()) return {};
  if (!(epsilon >= 0.0)) throw ArgumentError("epsilon must be non-negative");
  const double count = static_cast<double>(raw.size());
  const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / count;
  double var = 0.0;
  for (double v : raw) var += (v - mean) * (v - mean);
  var /= count;
  const double denom = std::sqrt(var + epsilon);
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = denom > 0.0 ? (raw[i] - mean) / denom : 0.0;
  return out;
}

DensityField kde_multiband(const PointCloud& pc, std::span<const KdeConfig> cfgs) {
  if (cfgs.empty()) throw ArgumentError("kde_multiband needs at least one bandwidth");
  const std::size_t n = pc.size();
  DensityField field;
  field.raw = Matrix(n, cfgs.size());
  field.normalized = Matrix(n, cfgs.size());
  for (std::size_t b = 0; b < cfgs.size(); ++b) {
    const auto raw = kde_densities(pc, cfgs[b]);
    const auto norm = normalize_densities(raw, cfgs[b].epsilon);
    for (std::size_t i = 0; i < n; ++i) {
      field.raw(i, b) = raw[i];
      field.normalized(i, b) = norm[i];
    }
    field.radii.push_back(cfgs[b].radius);
  }
  return field;
}

Matrix bev_max_grid(const PointCloud& pc, std::span<const double> values, const Roi3D& roi, std::size_t height,
                    std::size_t width, double empty_value) {
  if (values.size() != pc.size()) throw ArgumentError("value count does not match point count");
  if (height == 0 || width == 0) throw ArgumentError("grid dimensions must be positive");
  roi.validate();
  Matrix grid(height, width, -std::numeric_limits<double>::infinity());
  const double cx = (roi.x_max - roi.x_min) / static_cast<double>(width);
  const double cy = (roi.y_max - roi.y_min) / static_cast<double>(height);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (!roi.contains(pc.x(i), pc.y(i), pc.z(i))) continue;
    const auto col = std::min(width - 1, static_cast<std::size_t>((pc.x(i) - roi.x_min) / cx));
    const auto row = std::min(height - 1, static_cast<std::size_t>((pc.y(i) - roi.y_min) / cy));
    grid(row, col) = std::max(grid(row, col), values[i]);
  }
  for (double& v : grid.data) {
    if (std::isinf(v)) v = empty_value;
  }
  return grid;
}

}  // namespace radar_mrf
