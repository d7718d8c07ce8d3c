#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace m2oe2::cli {

enum ExitCode : int { ok = 0, runtime_failure = 1, invalid_input = 2 };

/// Entry point behind the m2oe2 binary. `args` excludes the program name.
///
///   m2oe2 train    --config run.cfg [--seed N] [--out DIR] [--baselines]
///   m2oe2 evaluate --config run.cfg [--checkpoint F] [--baselines] [--samples J]
///   m2oe2 forecast --config run.cfg --origin "YYYY-MM-DD HH:MM" [--checkpoint F]
///   m2oe2 gates    --config run.cfg --from T0 --to T1 [--checkpoint F]
///   m2oe2 synth    --out DIR [--seed N] [--weeks W]
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace m2oe2::cli
