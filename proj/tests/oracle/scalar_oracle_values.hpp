// Generated by tests/oracle/scalar_oracle.py (mpmath, 50 digits). Do not edit.
#pragma once

namespace wend::oracle {

inline constexpr double kIouOverlap = 1.4285714285714285714e-1;
inline constexpr double kGiouOverlap = -7.9365079365079365079e-2;
inline constexpr double kIouSecondGt = 6.6666666666666666667e-1;
inline constexpr double kLog2 = 6.9314718055994530942e-1;
inline constexpr double kBceP08Y0 = 1.6094379124341003746;
inline constexpr double kSmoothL1Half = 1.25e-1;
inline constexpr double kSmoothL1Two = 1.5;
inline constexpr double kGiouLossOverlap = 1.0793650793650793651;
inline constexpr double kSupTwoSample = 2.2314355131420975577e-1;
inline constexpr double kWeWeightHigh = 1.0e-7;
inline constexpr double kWeWeightLow = 9.0e-7;
inline constexpr double kWeLossHigh = 9.4824464092043671105e-9;
inline constexpr double kWeLossLow = 2.0723265836946411156e-7;
inline constexpr double kQualitySoft = 8.6505366017105454714e-1;
inline constexpr double kTotalEta0125 = 1.2789294391427621947e-1;
inline constexpr double kCosineLr49of50 = 3.9465431434568760953e-6;
inline constexpr double kCenternessQuarter = 5.7735026918962576451e-1;

}  // namespace wend::oracle
