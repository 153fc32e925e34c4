#pragma once

// Synthetic multi-scale runs with a known exponent profile D(t).

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tdu/analysis.hpp"

namespace oracle {

inline const std::vector<double> kScales{1000, 2000, 4000, 8000, 16000, 32000};

// Observable for a run of size N at aligned time t, given the exponent profile.
// noise is the log-normal spread of each sample.
inline std::vector<tdu::ScaleData> make_scales(const std::vector<double>& ns, const std::function<double(double)>& d_of_t,
                                   double noise, std::uint64_t seed, int runs_per_scale = 3,
                                   std::uint32_t base_g = 100) {
  std::vector<tdu::ScaleData> out;
  tdu::Rng rng(seed);
  for (double n : ns) {
    tdu::ScaleData sc{n, {}};
    for (int r = 0; r < runs_per_scale; ++r) {
      tdu::RunSeries run;
      run.run_id = "N" + std::to_string(static_cast<long long>(n)) + "_r" + std::to_string(r);
      run.n_params = n;
      run.seed = static_cast<std::uint64_t>(r);
      run.grok_epoch = base_g + 20u * static_cast<std::uint32_t>(r);
      run.status = tdu::RunStatus::grokked;
      const double g = *run.grok_epoch;
      for (std::uint32_t e = 1; e <= 2 * *run.grok_epoch; ++e) {
        const double t = (e - g) / g;
        const double v = 5.0 * std::pow(n, d_of_t(t)) * std::exp(noise * rng.normal());
        tdu::EpochStats st;
        st.run_id = run.run_id;
        st.epoch = e;
        st.s_avg = v;
        st.s_max = static_cast<std::uint64_t>(std::llround(v));
        st.s_epoch = st.s_max;
        st.n_batches = 1;
        run.epochs.push_back(st);
      }
      sc.runs.push_back(std::move(run));
    }
    out.push_back(std::move(sc));
  }
  return out;
}

}  // namespace oracle
