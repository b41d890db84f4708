#pragma once

#include <array>
#include <chrono>
#include <string_view>

namespace pbicgs {

enum class Phase { Preconditioner, HaloExchange, Allreduce, StencilKernels, VectorKernels, Total };

inline constexpr std::array<Phase, 6> kAllPhases{Phase::Preconditioner, Phase::HaloExchange, Phase::Allreduce,
                                                 Phase::StencilKernels, Phase::VectorKernels, Phase::Total};

/// Report keys; consumed verbatim by the plotting tools.
inline std::string_view phase_key(Phase p) {
  constexpr std::array<std::string_view, 6> keys{"preconditioner",  "halo_exchange",  "allreduce",
                                                 "stencil_kernels", "vector_kernels", "total"};
  return keys[static_cast<int>(p)];
}

/// Seconds accumulated per phase (monotonic clock, no overhead compensation).
struct PhaseTimings {
  std::array<double, 6> seconds{};

  double& operator[](Phase p) { return seconds[static_cast<int>(p)]; }
  double operator[](Phase p) const { return seconds[static_cast<int>(p)]; }
};

/// Adds the lifetime of the scope to one phase. A null target disables timing.
class ScopedPhase {
 public:
  ScopedPhase(PhaseTimings* target, Phase phase)
      : target_(target), phase_(phase), start_(target ? Clock::now() : Clock::time_point{}) {}
  ~ScopedPhase() {
    if (target_) (*target_)[phase_] += std::chrono::duration<double>(Clock::now() - start_).count();
  }
  ScopedPhase(const ScopedPhase&) = delete;
  ScopedPhase& operator=(const ScopedPhase&) = delete;

 private:
  using Clock = std::chrono::steady_clock;
  PhaseTimings* target_;
  Phase phase_;
  Clock::time_point start_;
};

}  // namespace pbicgs
