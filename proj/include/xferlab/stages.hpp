#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace xferlab {

// AASM sleep stages, encoded 0..4 on disk and in label arrays.
enum class Stage : std::uint8_t { W = 0, N1 = 1, N2 = 2, N3 = 3, REM = 4 };

inline constexpr std::size_t kNumStages = 5;
inline constexpr std::array<std::string_view, kNumStages> kStageNames{"W", "N1", "N2", "N3", "REM"};

enum class Modality { source, target };

inline constexpr std::string_view modality_name(Modality m) {
  return m == Modality::source ? "source" : "target";
}

}  // namespace xferlab
