#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "meshattn/camera.hpp"
#include "meshattn/feature_field.hpp"
#include "meshattn/mesh.hpp"
#include "meshattn/raster.hpp"

namespace meshattn {

/// Per-pixel feature grid with camera-space depth (+inf = background).
struct PixelFeatureMap {
  int height = 0;
  int width = 0;
  MatrixXf data;              // (height * width) x dim, row-major pixels
  std::vector<float> depth;   // height * width

  PixelFeatureMap() = default;
  PixelFeatureMap(int h, int w, Index dim);

  Index dim() const { return data.cols(); }
  Index pixel(int row, int col) const { return Index(row) * width + col; }
  bool foreground(Index p) const {
    return depth[static_cast<std::size_t>(p)] <
           std::numeric_limits<float>::infinity();
  }
};

struct VertexPixel {
  double row = 0.0;  // continuous image coordinates
  double col = 0.0;
  bool visible = false;
  bool behind_camera = false;
};

struct ViewProjection {
  CameraPose pose;
  DepthBuffer depth;
  std::vector<VertexPixel> vertices;
};

/// Projects every vertex and decides visibility against the rasterised
/// depth: visible iff in front of the camera, inside the image, and either
/// one of its own faces wins the z-buffer at its pixel or its depth is
/// within 1e-4 * bbox_diagonal of the z-buffer there.
ViewProjection project_vertices(const Mesh& mesh, const CameraPose& pose);

enum class TimestepSelection {
  LeastNoisy,  // final 75% of the denoising trajectory (default)
  MostNoisy,   // first 75%, the literal index reading of the summation
};

struct TimestepWeight {
  std::size_t step;  // position in the T..1 ordered list
  double weight;
};

/// ceil(0.75 T) selected steps with weights rising linearly from 0.1 to 1.0
/// towards the less noisy end of the selection.
std::vector<TimestepWeight> timestep_weights(
    std::size_t steps, TimestepSelection selection = TimestepSelection::LeastNoisy);

/// Weighted sum of per-step maps ordered from t = T (noisiest) to t = 1,
/// followed by per-pixel L2 normalisation.
PixelFeatureMap weight_timesteps(
    const std::vector<PixelFeatureMap>& per_step,
    TimestepSelection selection = TimestepSelection::LeastNoisy);

/// Per pixel: [alpha * diff ; (1 - alpha) * dino], renormalised to unit length.
PixelFeatureMap fuse_pixel_features(const PixelFeatureMap& diff,
                                    const PixelFeatureMap& dino,
                                    double alpha = 0.5);

/// Transfers one view's pixel features to the visible vertices.
///
/// Each visible vertex gathers its own projected pixel (when foreground)
/// and the foreground pixels whose back-projected surface points lie within
/// radius_frac * bbox_diagonal of it, nearest first, at most `k` in total,
/// and takes their mean. Feature grids coarser than the render are sampled
/// bilinearly over foreground cells only.
FeatureField unproject_view(const PixelFeatureMap& fused,
                            const ViewProjection& projection, const Mesh& mesh,
                            Index k = 100, double radius_frac = 0.01);

/// Streaming form of aggregate_views: per-vertex sums in double, added in
/// call order.
class ViewAccumulator {
 public:
  ViewAccumulator(Index n, Index dim);
  void add(const FeatureField& view);
  /// Means over contributing views; uncovered vertices copy the feature of
  /// the nearest covered vertex. Throws NoCoverage if nothing is covered.
  FeatureField finish(const Mesh& mesh) const;

 private:
  MatrixXd sum_;
  std::vector<std::uint32_t> count_;
};

FeatureField aggregate_views(const std::vector<FeatureField>& per_view,
                             const Mesh& mesh);

/// Produces the fused per-pixel map for one projected view.
using PixelFeatureSource =
    std::function<PixelFeatureMap(std::size_t view, const ViewProjection&)>;

struct UnprojectConfig {
  int n_elev = 10;
  int n_azim = 10;
  double dist_scale = 0.65;
  int image_size = 512;
  Index k = 100;
  double radius_frac = 0.01;
};

/// Full multi-view transfer: poses, projection, per-view gather, averaging.
FeatureField unproject_mesh(const Mesh& mesh, const UnprojectConfig& config,
                            const PixelFeatureSource& source);

/// Seeded smooth synthetic pixel features: low-frequency sinusoids of the
/// surface point seen at each pixel, with per-step noise that fades towards
/// the final denoising step. Stands in for the pretrained extractors.
struct SyntheticPixelFeatures {
  std::uint64_t seed = 0;
  Index diff_dim = 1280;
  Index dino_dim = 768;
  int steps = 30;
  int feature_size = 64;  // feature grid resolution (square)
  double alpha = 0.5;
  TimestepSelection selection = TimestepSelection::LeastNoisy;

  PixelFeatureMap operator()(const Mesh& mesh, const ViewProjection& view) const;
};

/// Constant per-pixel vector on every foreground pixel.
PixelFeatureMap constant_pixel_features(const ViewProjection& view,
                                        const Eigen::VectorXf& value);

/// ".pxf" pixel feature grid: "SGPX", u32 version = 1, u32 H, u32 W, u32 D,
/// H*W*D little-endian f32, then H*W f32 depth (+inf = background).
PixelFeatureMap load_pxf(const std::filesystem::path& path);
void save_pxf(const PixelFeatureMap& map, const std::filesystem::path& path);

/// Reads `view_%03d_diff_%02d.pxf` (step 0 = noisiest) and
/// `view_%03d_dino.pxf` from `dir`, then weights and fuses them.
PixelFeatureMap load_view_features(const std::filesystem::path& dir,
                                   std::size_t view, double alpha,
                                   TimestepSelection selection);

}  // namespace meshattn
