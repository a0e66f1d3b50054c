#include "rspt/render.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace rspt {

void write_ppm(const Image& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb.data()),
              static_cast<std::streamsize>(image.rgb.size()));
}

namespace {

Scalar normal_cdf(Scalar x, Scalar mu, Scalar sigma) {
    return Scalar(0.5) * (1 + std::erf((x - mu) / (sigma * std::sqrt(Scalar(2)))));
}

}  // namespace

Scalar gmm_cell_mass(const MixtureForecast& forecast, const RelPos& lo, const RelPos& hi) {
    Scalar mass = 0;
    for (int f = 0; f < forecast.horizon(); ++f) {
        for (int k = 0; k < forecast.mixtures(); ++k) {
            const Scalar px = normal_cdf(hi.x, forecast.mean_x(f, k), forecast.std_x(f, k)) -
                              normal_cdf(lo.x, forecast.mean_x(f, k), forecast.std_x(f, k));
            const Scalar py = normal_cdf(hi.y, forecast.mean_y(f, k), forecast.std_y(f, k)) -
                              normal_cdf(lo.y, forecast.mean_y(f, k), forecast.std_y(f, k));
            mass += forecast.weights(f, k) * px * py;
        }
    }
    return mass;
}

namespace {

/// Pixel block of a cell; image rows run front-to-back (max forward on top).
void cell_origin(int row, int col, int px, int& x0, int& y0) {
    x0 = col * px;
    y0 = (EgoGrid::kSize - 1 - row) * px;
}

void fill_cell(Image& img, int row, int col, int px, uint8_t r, uint8_t g, uint8_t b) {
    int x0, y0;
    cell_origin(row, col, px, x0, y0);
    for (int y = y0; y < y0 + px; ++y)
        for (int x = x0; x < x0 + px; ++x) img.set(x, y, r, g, b);
}

void draw_point(Image& img, const RelPos& rel, int px, uint8_t r, uint8_t g, uint8_t b) {
    const Scalar fx = (rel.x + EgoGrid::kHalfExtent) / EgoGrid::kCellSize * px;
    const Scalar fy = (EgoGrid::kHalfExtent - rel.y) / EgoGrid::kCellSize * px;
    const int cx = static_cast<int>(fx), cy = static_cast<int>(fy);
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) img.set(cx + dx, cy + dy, r, g, b);
}

void draw_segment(Image& img, const RelPos& a, const RelPos& b, int px, uint8_t r, uint8_t g,
                  uint8_t bl) {
    const int steps = 64;
    for (int i = 0; i <= steps; ++i) {
        const Scalar t = static_cast<Scalar>(i) / steps;
        const RelPos p{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
        const int x = static_cast<int>((p.x + EgoGrid::kHalfExtent) / EgoGrid::kCellSize * px);
        const int y = static_cast<int>((EgoGrid::kHalfExtent - p.y) / EgoGrid::kCellSize * px);
        img.set(x, y, r, g, bl);
    }
}

}  // namespace

Image render_frame(const EgoGrid& grid, const MixtureForecast* forecast,
                   const Mat* window_samples,
                   const Eigen::Array<bool, Eigen::Dynamic, 1>* window_valid,
                   const RenderOptions& options) {
    const int px = options.cell_px;
    Image img(EgoGrid::kSize * px, EgoGrid::kSize * px);

    for (int row = 0; row < EgoGrid::kSize; ++row) {
        for (int col = 0; col < EgoGrid::kSize; ++col) {
            uint8_t v = 128;  // unexplored gray
            if (grid.explored(row, col))
                v = static_cast<uint8_t>(std::lround(grid.prob(row, col) * 255));
            fill_cell(img, row, col, px, v, v, v);
        }
    }

    if (options.draw_forecast && forecast) {
        Mat mass(EgoGrid::kSize, EgoGrid::kSize);
        Scalar max_mass = 0;
        for (int row = 0; row < EgoGrid::kSize; ++row) {
            for (int col = 0; col < EgoGrid::kSize; ++col) {
                const RelPos c = EgoGrid::rel_of_cell(row, col);
                const Scalar half = EgoGrid::kCellSize / 2;
                mass(row, col) = gmm_cell_mass(*forecast, {c.x - half, c.y - half},
                                               {c.x + half, c.y + half});
                max_mass = std::max(max_mass, mass(row, col));
            }
        }
        if (max_mass > 0) {
            for (int row = 0; row < EgoGrid::kSize; ++row) {
                for (int col = 0; col < EgoGrid::kSize; ++col) {
                    const Scalar rel = mass(row, col) / max_mass;
                    if (rel < 0.02) continue;
                    int x0, y0;
                    cell_origin(row, col, px, x0, y0);
                    for (int y = y0; y < y0 + px; ++y) {
                        for (int x = x0; x < x0 + px; ++x) {
                            const size_t at = (static_cast<size_t>(y) * img.width + x) * 3;
                            img.rgb[at + 1] = std::max(
                                img.rgb[at + 1],
                                static_cast<uint8_t>(std::lround(rel * 255)));
                        }
                    }
                }
            }
        }
    }

    if (options.draw_history && window_samples && window_valid) {
        std::optional<RelPos> prev;
        for (Eigen::Index i = 0; i < window_samples->rows(); ++i) {
            if (!(*window_valid)[i]) {
                prev.reset();
                continue;
            }
            const RelPos p{(*window_samples)(i, 0), (*window_samples)(i, 1)};
            if (prev) draw_segment(img, *prev, p, px, 0, 0, 0);
            draw_point(img, p, px, 0, 0, 0);
            prev = p;
        }
    }

    if (grid.target_cell[0] >= 0)
        fill_cell(img, grid.target_cell[0], grid.target_cell[1], px, 220, 30, 30);
    fill_cell(img, EgoGrid::center_index(), EgoGrid::center_index(), px, 40, 80, 230);
    return img;
}

void write_ego_grid_image(const EgoGrid& grid, const std::string& path,
                          const RenderOptions& options) {
    write_ppm(render_frame(grid, nullptr, nullptr, nullptr, options), path);
}

int render_replay(const std::string& replay_path, const std::string& out_dir,
                  const RenderOptions& options) {
    const Replay replay = read_replay(replay_path);
    if (replay.truncated)
        std::cerr << "warning: " << replay_path
                  << " is truncated; rendering up to the last complete step\n";
    std::filesystem::create_directories(out_dir);
    int frame = 0;
    for (const auto& step : replay.steps) {
        const EgoGrid grid = step.grid.to_grid();
        const Image img =
            render_frame(grid, &step.forecast, &step.window_samples, &step.window_valid, options);
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06d.ppm", frame);
        write_ppm(img, out_dir + "/" + name);
        ++frame;
    }
    return frame;
}

}  // namespace rspt
