#pragma once

namespace resopt {

inline constexpr const char* kToolVersion = "1.0.0";

// Schema versions for persisted artifacts.
inline constexpr const char* kTrajectoryCsvSchema = "trajectory-csv-v1";
inline constexpr const char* kSimulationCsvSchema = "simulation-csv-v1";
inline constexpr const char* kDatasetCsvSchema = "dataset-csv-v1";
inline constexpr const char* kSurrogateFileSchema = "resopt-surrogate-model v1";
inline constexpr const char* kDatasetMetaSchema = "resopt-dataset-meta v1";

} // namespace resopt
