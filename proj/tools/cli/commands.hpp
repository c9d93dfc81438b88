#pragma once
// Command-line surface: explain, evaluate, agreement, baseline, render, fixture.
//
// Exit codes: 0 success, 1 configuration error, 2 predictor failure,
// 3 input error.

#include <ostream>
#include <string>
#include <vector>

namespace mmsurrogate::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitPredictor = 2;
inline constexpr int kExitInput = 3;

// Environment variable consulted when --predictor is absent.
inline constexpr const char* kPredictorEnv = "MMSURROGATE_PREDICTOR";

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmsurrogate::cli
