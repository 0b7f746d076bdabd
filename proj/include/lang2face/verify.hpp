#pragma once

#include <string>
#include <vector>

namespace lang2face {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

// Fast, training-free property suites: codec round-trips, renderer
// locality/monotonicity oracle, attention softmax oracle, closed-form
// loss anchors, the finite-difference gradient suite and the SSIM/FID
// oracles.
CheckResult check_codec_roundtrip();
CheckResult check_renderer_locality(int n_identities = 20);
CheckResult check_attention_oracle(int n_instances = 1000);
CheckResult check_loss_anchors();
CheckResult check_gradient_suite();
CheckResult check_metric_oracles();

std::vector<CheckResult> run_fast_checks();

}  // namespace lang2face
