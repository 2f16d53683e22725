#include "spext/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

namespace spext {

void ChainConfig::validate() const {
  if (n_chains < 1) throw std::domain_error("need at least one chain");
  if (n_warmup < 0 || n_warmup >= n_iterations) throw std::domain_error("need 0 <= n_warmup < n_iterations");
  if (adapt_window < 1) throw std::domain_error("adapt_window must be positive");
}

std::uint64_t chain_seed(std::uint64_t seed, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffULL), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x5eedu};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

ChainOutput run_one(const TargetFactory& factory, const ChainConfig& cfg, int chain) {
  ChainOutput out;
  out.seed = chain_seed(cfg.seed, chain);
  std::mt19937_64 rng(out.seed);

  std::unique_ptr<BlockTarget> target;
  for (int attempt = 0; attempt < 100; ++attempt) {
    target = factory(rng, attempt);
    if (std::isfinite(target->log_density())) break;
    target.reset();
  }
  if (!target)
    throw std::runtime_error(
        fmt::format("chain {}: log posterior is -inf at every one of 100 starting points", chain));

  const std::size_t blocks = target->block_count();
  std::vector<BlockInfo> info;
  std::vector<double> scale(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    info.push_back(target->block(b));
    scale[b] = info[b].initial_scale;
    std::size_t best = 0;
    for (const auto& [prefix, s] : cfg.block_scales) {
      if (info[b].name.rfind(prefix, 0) == 0 && prefix.size() >= best) {
        scale[b] = s;
        best = prefix.size();
      }
    }
  }

  const auto names = target->parameter_names();
  out.parameter_names = names;
  for (const auto& bi : info) out.block_names.push_back(bi.name);
  const int kept = cfg.n_iterations - cfg.n_warmup;
  out.draws.resize(kept, static_cast<Eigen::Index>(names.size()));
  std::vector<int> window_accept(blocks, 0), kept_accept(blocks, 0);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  std::vector<double> step;
  std::vector<double> row(names.size());
  int windows_done = 0;

  for (int it = 0; it < cfg.n_iterations; ++it) {
    target->refresh();
    for (std::size_t b = 0; b < blocks; ++b) {
      step.resize(static_cast<std::size_t>(info[b].dim + info[b].extra_variates));
      const double sd = info[b].adaptive ? scale[b] : 1.0;
      for (std::size_t i = 0; i < step.size(); ++i) step[i] = (static_cast<int>(i) < info[b].dim ? sd : 1.0) * normal(rng);
      const double log_ratio = target->propose(b, step);
      const double u = uniform(rng);
      if (std::isfinite(log_ratio) && std::log(u) < log_ratio) {
        target->commit();
        if (it < cfg.n_warmup)
          ++window_accept[b];
        else
          ++kept_accept[b];
      } else {
        target->discard();
      }
    }
    if (it < cfg.n_warmup && (it + 1) % cfg.adapt_window == 0) {
      ++windows_done;
      const double gain = std::min(1.0, 3.0 / std::sqrt(static_cast<double>(windows_done)));
      for (std::size_t b = 0; b < blocks; ++b) {
        if (!info[b].adaptive) continue;
        const double rate = static_cast<double>(window_accept[b]) / cfg.adapt_window;
        scale[b] *= std::exp(gain * 3.0 * (rate - info[b].target_acceptance()));
        window_accept[b] = 0;
      }
    }
    if (it >= cfg.n_warmup) {
      target->write_parameters(row);
      out.draws.row(it - cfg.n_warmup) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
    }
  }
  for (std::size_t b = 0; b < blocks; ++b) out.acceptance.push_back(static_cast<double>(kept_accept[b]) / kept);
  out.final_scales = scale;
  return out;
}

}  // namespace

ChainsResult run_block_chains(const TargetFactory& factory, const ChainConfig& config) {
  config.validate();
  ChainsResult result;
  result.chains.resize(static_cast<std::size_t>(config.n_chains));
  const int threads = std::max(1, std::min(config.threads, config.n_chains));
  if (threads == 1) {
    for (int c = 0; c < config.n_chains; ++c) result.chains[static_cast<std::size_t>(c)] = run_one(factory, config, c);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.n_chains));
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (int c = w; c < config.n_chains; c += threads) {
          try {
            result.chains[static_cast<std::size_t>(c)] = run_one(factory, config, c);
          } catch (...) {
            errors[static_cast<std::size_t>(c)] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  result.parameter_names = result.chains.front().parameter_names;
  result.block_names = result.chains.front().block_names;
  return result;
}

}  // namespace spext
