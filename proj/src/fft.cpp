#include "polaron/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace polaron::fft {
namespace {

// The FFTW planner is not thread-safe; execution with fftw_execute_dft is.
std::mutex planner_mutex;

struct PlanCache {
  std::map<std::pair<std::vector<int>, int>, fftw_plan> plans;
  ~PlanCache() {
    std::lock_guard<std::mutex> lock(planner_mutex);
    for (auto& [k, p] : plans) fftw_destroy_plan(p);
  }
};

fftw_plan get_plan(const std::vector<int>& shape, int sign) {
  thread_local PlanCache cache;
  auto key = std::make_pair(shape, sign);
  auto it = cache.plans.find(key);
  if (it != cache.plans.end()) return it->second;
  std::size_t n = 1;
  for (int v : shape) n *= static_cast<std::size_t>(v);
  std::lock_guard<std::mutex> lock(planner_mutex);
  auto* a = fftw_alloc_complex(n);
  auto* b = fftw_alloc_complex(n);
  fftw_plan p = fftw_plan_dft(static_cast<int>(shape.size()), shape.data(), a, b, sign,
                              FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(a);
  fftw_free(b);
  if (!p) throw std::runtime_error("fft: planner failed");
  cache.plans.emplace(key, p);
  return p;
}

std::size_t count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int v : shape) n *= static_cast<std::size_t>(v);
  return n;
}

}  // namespace

void forward(const std::vector<int>& shape, const std::complex<double>* in, std::complex<double>* out) {
  fftw_execute_dft(get_plan(shape, FFTW_FORWARD),
                   reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

void inverse(const std::vector<int>& shape, const std::complex<double>* in, std::complex<double>* out) {
  fftw_execute_dft(get_plan(shape, FFTW_BACKWARD),
                   reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
  const std::size_t n = count(shape);
  const double s = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] *= s;
}

Eigen::VectorXcd forward(const Grid& g, const Eigen::VectorXcd& x) {
  if (static_cast<std::size_t>(x.size()) != g.size()) throw std::invalid_argument("fft: size mismatch");
  Eigen::VectorXcd out(x.size());
  forward(g.shape(), x.data(), out.data());
  return out;
}

Eigen::VectorXcd forward(const Grid& g, const Eigen::VectorXd& x) {
  return forward(g, Eigen::VectorXcd(x.cast<std::complex<double>>()));
}

Eigen::VectorXcd inverse(const Grid& g, const Eigen::VectorXcd& x) {
  if (static_cast<std::size_t>(x.size()) != g.size()) throw std::invalid_argument("fft: size mismatch");
  Eigen::VectorXcd out(x.size());
  inverse(g.shape(), x.data(), out.data());
  return out;
}

Eigen::VectorXd inverse_real(const Grid& g, const Eigen::VectorXcd& x) { return inverse(g, x).real(); }

FourierField transform(const ScalarField& f) { return {f.grid, forward(*f.grid, f.values)}; }

ScalarField inverse_transform(const FourierField& f) { return ScalarField(f.grid, inverse_real(*f.grid, f.coeffs)); }

namespace {

// Copy Fourier coefficients between grids by signed frequency. The Nyquist
// mode of an even grid is split symmetrically so real fields stay real.
Eigen::VectorXcd transfer(const Grid& src, const Eigen::VectorXcd& c, const Grid& dst) {
  if (!(src.cell() == dst.cell())) throw std::invalid_argument("resample: grids live on different cells");
  const int d = src.dim();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dst.size()));
  const auto& ns = src.shape();
  const auto& nd = dst.shape();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto j = src.frequency(i);
    double w = 1.0;
    bool keep = true;
    std::vector<std::vector<int>> targets{{}};
    for (int a = 0; a < d; ++a) {
      std::vector<int> opts;
      if (2 * std::abs(j[a]) == ns[a]) {
        // source Nyquist: spread over +/- on a larger grid
        if (nd[a] > ns[a]) {
          opts = {j[a], -j[a]};
          w *= 0.5;
        } else {
          opts = {j[a]};
        }
      } else {
        opts = {j[a]};
      }
      std::vector<std::vector<int>> next;
      for (auto& t : targets)
        for (int o : opts) {
          if (2 * std::abs(o) > nd[a]) keep = false;
          auto tt = t;
          tt.push_back(o);
          next.push_back(tt);
        }
      targets = std::move(next);
    }
    if (!keep) continue;
    for (auto& t : targets) out[static_cast<Eigen::Index>(dst.flat_index(t))] += w * c[static_cast<Eigen::Index>(i)];
  }
  return out * (static_cast<double>(dst.size()) / static_cast<double>(src.size()));
}

}  // namespace

ScalarField resample(const ScalarField& f, GridPtr target) {
  auto c = transfer(*f.grid, forward(*f.grid, f.values), *target);
  return ScalarField(target, inverse_real(*target, c));
}

ComplexField resample(const ComplexField& f, GridPtr target) {
  auto c = transfer(*f.grid, forward(*f.grid, f.values), *target);
  return ComplexField{target, inverse(*target, c)};
}

}  // namespace polaron::fft
