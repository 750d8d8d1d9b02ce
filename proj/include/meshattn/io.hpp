#pragma once

#include <filesystem>
#include <string>

#include "meshattn/feature_field.hpp"
#include "meshattn/metrics.hpp"

namespace meshattn {

/// Shortest text that reads back as the same double.
std::string format_double(double value);

/// Text saliency: one decimal value per line.
SaliencyMap load_saliency_text(const std::filesystem::path& path);
void save_saliency_text(const SaliencyMap& map, const std::filesystem::path& path);

/// Binary saliency: "SMAP", u32 version = 1, u64 N, N little-endian f32.
SaliencyMap load_saliency_binary(const std::filesystem::path& path);
void save_saliency_binary(const SaliencyMap& map,
                          const std::filesystem::path& path);

/// Dispatches on extension: ".smap" is binary, anything else text.
SaliencyMap load_saliency(const std::filesystem::path& path);
void save_saliency(const SaliencyMap& map, const std::filesystem::path& path);

/// One vertex index per line.
FixationSet load_fixations(const std::filesystem::path& path);
void save_fixations(const FixationSet& fix, const std::filesystem::path& path);

/// "SGFT", u32 version = 1, u64 N, u32 D, N*D little-endian f32 row-major,
/// then N little-endian u16 coverage counts.
FeatureField load_featb(const std::filesystem::path& path);
void save_featb(const FeatureField& field, const std::filesystem::path& path);

}  // namespace meshattn
