#pragma once

// Reference implementations and fixtures shared by the test binaries.

#include "rmnet/core.hpp"
#include "rmnet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <vector>

namespace rmnet::support {

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) out(i, j) = nd(rng);
  return out;
}

// Exact optimal transport cost between two equal-size uniform clouds: an
// optimal plan is a scaled permutation.
inline double exact_ot_uniform(const Matrix& cost) {
  const Index n = cost.rows();
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (Index i = 0; i < n; ++i) c += cost(i, perm[i]);
    best = std::min(best, c / static_cast<double>(n));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Stand-in for the public SGEMM table: every parameter combination that
// satisfies the kernel's divisibility constraints, with synthetic run times.
inline void write_sgemm_grid(std::ostream& out, std::uint64_t seed) {
  out << "MWG,NWG,KWG,MDIMC,NDIMC,MDIMA,NDIMB,KWI,VWM,VWN,STRM,STRN,SA,SB,"
         "Run1 (ms),Run2 (ms),Run3 (ms),Run4 (ms)\n";
  Rng rng(seed);
  std::uniform_real_distribution<double> jitter(0.95, 1.05);
  const int wg[] = {16, 32, 64, 128};
  const int kwg[] = {16, 32};
  const int dim[] = {8, 16, 32};
  const int kwi[] = {2, 8};
  const int vw[] = {1, 2, 4, 8};
  for (int mwg : wg)
    for (int nwg : wg)
      for (int kw : kwg)
        for (int mdimc : dim)
          for (int ndimc : dim)
            for (int mdima : dim)
              for (int ndimb : dim)
                for (int ki : kwi)
                  for (int vwm : vw)
                    for (int vwn : vw) {
                      if (mwg % (mdimc * vwm) || nwg % (ndimc * vwn)) continue;
                      if (mwg % (mdima * vwm) || nwg % (ndimb * vwn)) continue;
                      const int threads = mdimc * ndimc;
                      if (threads % mdima || threads % ndimb) continue;
                      if (kw % (threads / mdima) || kw % (threads / ndimb)) continue;
                      if (kw % ki) continue;
                      for (int bits = 0; bits < 16; ++bits) {
                        const int strm = bits & 1, strn = (bits >> 1) & 1;
                        const int sa = (bits >> 2) & 1, sb = (bits >> 3) & 1;
                        const double base = 20.0 + 0.05 * mwg + 0.03 * nwg + 2.0 * vwm -
                                            1.5 * sa + 0.7 * strn + 0.1 * ki;
                        out << mwg << ',' << nwg << ',' << kw << ',' << mdimc << ',' << ndimc
                            << ',' << mdima << ',' << ndimb << ',' << ki << ',' << vwm << ','
                            << vwn << ',' << strm << ',' << strn << ',' << sa << ',' << sb;
                        for (int r = 0; r < 4; ++r) out << ',' << base * jitter(rng);
                        out << '\n';
                      }
                    }
}

// Chi-square statistic of observed counts against a uniform expectation.
inline double chi_square_uniform(const std::vector<long>& counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  const double expected = total / static_cast<double>(counts.size());
  double chi = 0.0;
  for (const long c : counts) chi += (c - expected) * (c - expected) / expected;
  return chi;
}

// Upper 0.999 quantile of chi-square with k degrees of freedom
// (Wilson-Hilferty approximation).
inline double chi_square_bound(int k) {
  const double z = 3.090232;
  const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * t * t * t;
}

}  // namespace rmnet::support
