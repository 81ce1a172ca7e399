#pragma once

// Generated by reference_values.py (mpmath, printed to 30 significant digits).

namespace oncf::oracle {

inline constexpr double kLn2 = 0.693147180559945309417232121458;
inline constexpr double kBprLoss_10_m10 = 0.00000000206115362031438070323898279888;
inline constexpr double kBprLoss_m1_1 = 2.12692801104297249644372680636;
inline constexpr double kNdcgRank2 = 0.630929753571457437099527114343;
inline constexpr double kNdcgRank11 = 0.278942945651129843191044081038;
inline constexpr double kAdagradSingleStep = -0.09999995000002499998750000625;
inline constexpr double kAdagradSecondStep = 0.0707106281186901077541437812644;

}  // namespace oncf::oracle
