#pragma once

#include <string>

#include "rspt/io/replay.hpp"

namespace rspt {

struct Image {
    int width = 0, height = 0;
    std::vector<uint8_t> rgb;

    Image(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 0) {}

    void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
        if (x < 0 || y < 0 || x >= width || y >= height) return;
        const size_t at = (static_cast<size_t>(y) * width + x) * 3;
        rgb[at] = r;
        rgb[at + 1] = g;
        rgb[at + 2] = b;
    }
};

void write_ppm(const Image& image, const std::string& path);

/// Exact probability mass a mixture forecast assigns to an ego-grid cell,
/// summed over all future steps and components (per-axis Gaussian CDFs).
Scalar gmm_cell_mass(const MixtureForecast& forecast, const RelPos& lo, const RelPos& hi);

struct RenderOptions {
    int cell_px = 8;
    bool draw_forecast = true;
    bool draw_history = true;
};

/// One composite frame: the ego map (occupied white, free black, unexplored
/// gray, target red, tracker blue), the history polyline in black and the
/// forecast density in green (brighter = more probable).
Image render_frame(const EgoGrid& grid, const MixtureForecast* forecast,
                   const Mat* window_samples,
                   const Eigen::Array<bool, Eigen::Dynamic, 1>* window_valid,
                   const RenderOptions& options = {});

/// Export an ego-grid snapshot image (the mapping interface).
void write_ego_grid_image(const EgoGrid& grid, const std::string& path,
                          const RenderOptions& options = {});

/// Render a replay into out_dir/frame_000000.ppm ... Returns the number of
/// frames written; a truncated log renders up to the last complete step.
int render_replay(const std::string& replay_path, const std::string& out_dir,
                  const RenderOptions& options = {});

}  // namespace rspt
