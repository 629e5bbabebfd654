#include "oracles/ssim_oracle.hpp"

#include <cmath>
#include <limits>

namespace oracle {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> kernel2d() {
  std::vector<double> k(kWin * kWin);
  double sum = 0;
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) {
      const double dy = i - kWin / 2, dx = j - kWin / 2;
      k[i * kWin + j] = std::exp(-(dx * dx + dy * dy) / (2 * kSigma * kSigma));
      sum += k[i * kWin + j];
    }
  for (double& x : k) x /= sum;
  return k;
}

Grid half(const Grid& g) {
  Grid o{g.h / 2, g.w / 2, {}};
  o.v.resize(o.h * o.w);
  for (std::size_t y = 0; y < o.h; ++y)
    for (std::size_t x = 0; x < o.w; ++x)
      o.v[y * o.w + x] = 0.25 * (g.at(2 * y, 2 * x) + g.at(2 * y + 1, 2 * x) +
                                 g.at(2 * y, 2 * x + 1) + g.at(2 * y + 1, 2 * x + 1));
  return o;
}

}  // namespace

void ssim_maps(const Grid& a, const Grid& b, double& ssim, double& cs) {
  static const std::vector<double> k = kernel2d();
  const std::size_t oh = a.h - kWin + 1, ow = a.w - kWin + 1;
  double s_sum = 0, c_sum = 0;
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const double wt = k[i * kWin + j];
          const double va = a.at(y + i, x + j), vb = b.at(y + i, x + j);
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      const double c = (2 * cov + kC2) / (va + vb + kC2);
      const double l = (2 * ma * mb + kC1) / (ma * ma + mb * mb + kC1);
      s_sum += l * c;
      c_sum += c;
    }
  ssim = s_sum / static_cast<double>(oh * ow);
  cs = c_sum / static_cast<double>(oh * ow);
}

double ssim(const Grid& a, const Grid& b) {
  double s, c;
  ssim_maps(a, b, s, c);
  return s;
}

double ms_ssim(const Grid& a, const Grid& b) {
  const double full[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  int scales = 0;
  for (int s = 5; s >= 1; --s) {
    const std::size_t need = static_cast<std::size_t>(kWin) << (s - 1);
    if (a.h >= need && a.w >= need) {
      scales = s;
      break;
    }
  }
  double wsum = 0;
  for (int s = 0; s < scales; ++s) wsum += full[s];
  Grid x = a, y = b;
  double out = 1;
  for (int s = 0; s < scales; ++s) {
    double sv, cv;
    ssim_maps(x, y, sv, cv);
    const double term = s == scales - 1 ? sv : cv;
    out *= std::pow(std::max(term, 1e-6), full[s] / wsum);
    if (s + 1 < scales) {
      x = half(x);
      y = half(y);
    }
  }
  return out;
}

double psnr(const std::vector<double>& a, const std::vector<double>& b) {
  double mse = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= static_cast<double>(a.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return -10 * std::log10(mse);
}

}  // namespace oracle
