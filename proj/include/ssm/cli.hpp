#pragma once

namespace ssm::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kFormat = 2, kNoConvergence = 3 };

/// Entry point of the `ssmtool` executable: solve | classify | circles | eigs | bench.
/// Thread count comes from SSM_NUM_THREADS when set.
int run(int argc, char** argv);

}  // namespace ssm::cli
