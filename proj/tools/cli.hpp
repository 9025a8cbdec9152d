#pragma once

// Command-line front end. Every command reads and writes under one output
// root (--out, else the config's "output", else $BRAINNET_OUT, else ./runs):
//
//   recording.bnr, truth.json, {train,valid,test}.bns   generate
//   bcpc.ckpt, pretrain_curve.csv                       pretrain
//   model[_<ablation>].ckpt, train_curve[_<ablation>].csv  train
//   report[_<ablation>].json                            evaluate
//   graphs/<split>_<begin>_<count>/...                  export-graphs
//   sweep/sweep.csv, sweep/sweep.json                   sweep-thresholds
//   summary.json                                        report

#include "brainnet/error.hpp"

namespace brainnet::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitIo = 4,
  kExitSaturation = 5,
  kExitDivergence = 6,
  kExitMapMismatch = 7,
};

int exit_code(ErrorCode code);

// Parses arguments, runs one command and returns the process exit code.
// Errors are reported on stderr.
int run(int argc, const char* const* argv);

}  // namespace brainnet::cli
