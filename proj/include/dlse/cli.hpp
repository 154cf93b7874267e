#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dlse/experiment.hpp"
#include "dlse/rnd.hpp"

namespace dlse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumeric = 1;
inline constexpr int kExitConfig = 2;

/// Runs `dlse <args...>` (args excludes the program name) and returns the
/// exit code. Diagnostics go to `err`, summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads implied volatilities from either an option-chain CSV
/// (strike,price,kind,tau,spot,rate,dividend) or a scenario CSV
/// (strike,price,iv,tag); scenario files take metadata from `meta`.
IvCurve load_curve(const std::string& path, const MarketMeta& meta);

/// Quotes from an option-chain CSV, or calls from a scenario CSV's prices.
std::vector<OptionQuote> load_quotes(const std::string& path, const MarketMeta& meta);

/// RND CSV (strike,density,raw_density) with metadata from `meta`.
RndEstimate load_rnd(const std::string& path, const MarketMeta& meta);
void write_rnd(const std::string& path, const RndEstimate& rnd);

}  // namespace dlse::cli
