#include "panorad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace panorad {

namespace {

void require_same(const ErpGrid& a, const ErpGrid& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": prediction and ground truth differ in shape");
    }
}

ErpGrid luminance(const ErpGrid& g) {
    ErpGrid out(g.height(), g.width(), 1);
    for (int h = 0; h < g.height(); ++h) {
        for (int w = 0; w < g.width(); ++w) {
            double s = 0.0;
            for (int c = 0; c < g.channels(); ++c) {
                s += g(h, w, c);
            }
            out(h, w) = s / g.channels();
        }
    }
    return out;
}

template <typename Fn>
void for_valid(const ErpGrid& pred, const ErpGrid& gt, const ErpGrid* validity, const char* op, Fn fn) {
    require_same(pred, gt, op);
    if (gt.channels() != 1) {
        throw DimensionError(std::string(op) + ": expected single-channel depth");
    }
    if (validity != nullptr && !validity->same_shape(gt)) {
        throw DimensionError(std::string(op) + ": validity mask differs in shape");
    }
    long count = 0;
    for (Eigen::Index i = 0; i < gt.size(); ++i) {
        if (validity != nullptr && validity->data()[i] == 0.0) {
            continue;
        }
        if (!(gt.data()[i] > 0.0)) {
            throw DataError(std::string(op) + ": ground-truth depth must be positive on valid pixels");
        }
        fn(pred.data()[i], gt.data()[i]);
        ++count;
    }
    if (count == 0) {
        throw DataError(std::string(op) + ": no valid pixels");
    }
}

struct Raster {
    Eigen::Vector2d origin;
    Eigen::Vector2d cell;
};

void require_polygon(const Polygon& p) {
    if (p.size() < 3 || std::abs(polygon_area(p)) < 1e-12) {
        throw ParameterError("layout_iou2d: degenerate polygon");
    }
}

// Even-odd fill of pixel centres, one scanline at a time.
std::vector<std::uint8_t> rasterise(const Polygon& poly, const Raster& r) {
    std::vector<std::uint8_t> out(std::size_t(kIouRaster) * kIouRaster, 0);
    std::vector<double> xs;
    for (int j = 0; j < kIouRaster; ++j) {
        const double z = r.origin.y() + (j + 0.5) * r.cell.y();
        xs.clear();
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Eigen::Vector2d& a = poly[i];
            const Eigen::Vector2d& b = poly[(i + 1) % poly.size()];
            if ((a.y() <= z) != (b.y() <= z)) {
                xs.push_back(a.x() + (z - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
            }
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            const int first = std::max(0, static_cast<int>(std::ceil((xs[k] - r.origin.x()) / r.cell.x() - 0.5)));
            const int last = std::min(kIouRaster - 1,
                                      static_cast<int>(std::floor((xs[k + 1] - r.origin.x()) / r.cell.x() - 0.5)));
            for (int i = first; i <= last; ++i) {
                out[std::size_t(j) * kIouRaster + std::size_t(i)] = 1;
            }
        }
    }
    return out;
}

// Horizontal distance r cos(phi) of a continuous latitude, interpolated
// between rows and columns (circular in longitude).
double horizontal_distance(const ErpGrid& depth, const ErpGrid* validity, double latitude, double longitude,
                           bool& valid) {
    const int height = depth.height();
    const int width = depth.width();
    const double hf = std::clamp((std::numbers::pi / 2 - latitude) * height / std::numbers::pi - 0.5, 0.0,
                                 double(height - 1));
    const double wf = (longitude + std::numbers::pi) * width / (2 * std::numbers::pi) - 0.5;
    const int h0 = static_cast<int>(std::floor(hf));
    const int h1 = std::min(h0 + 1, height - 1);
    const double th = hf - h0;
    const double wfl = std::floor(wf);
    const double tw = wf - wfl;
    const int w0 = ((static_cast<int>(wfl) % width) + width) % width;
    const int w1 = (w0 + 1) % width;
    const int hs[2] = {h0, h1};
    const int ws[2] = {w0, w1};
    const double wh[2] = {1 - th, th};
    const double ww[2] = {1 - tw, tw};
    double out = 0.0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double weight = wh[i] * ww[j];
            if (weight == 0.0) {
                continue;
            }
            const double d = depth(hs[i], ws[j]);
            if (!(d > 0.0) || !std::isfinite(d) || (validity != nullptr && (*validity)(hs[i], ws[j]) == 0.0)) {
                valid = false;
                return 0.0;
            }
            out += weight * d * std::cos(row_latitude(hs[i], height));
        }
    }
    valid = true;
    return out;
}

}  // namespace

double psnr(const ErpGrid& pred, const ErpGrid& gt) {
    require_same(pred, gt, "psnr");
    const double mse = (pred.data() - gt.data()).square().mean();
    if (mse == 0.0) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ErpGrid& pred, const ErpGrid& gt) {
    require_same(pred, gt, "ssim");
    constexpr int kWindow = 11;
    constexpr int kRadius = kWindow / 2;
    constexpr double kSigma = 1.5;
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    if (pred.height() < kWindow) {
        throw DimensionError("ssim: image height " + std::to_string(pred.height()) + " is smaller than the 11x11 window");
    }
    double g[kWindow];
    double total = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        g[i] = std::exp(-0.5 * (i - kRadius) * (i - kRadius) / (kSigma * kSigma));
        total += g[i];
    }
    for (double& v : g) {
        v /= total;
    }
    const ErpGrid x = luminance(pred);
    const ErpGrid y = luminance(gt);
    const int width = x.width();
    double sum = 0.0;
    long count = 0;
    for (int h = kRadius; h < x.height() - kRadius; ++h) {
        for (int w = 0; w < width; ++w) {
            double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
            for (int i = 0; i < kWindow; ++i) {
                for (int j = 0; j < kWindow; ++j) {
                    const double k = g[i] * g[j];
                    const int ws = (w + j - kRadius + width) % width;
                    const double a = x(h + i - kRadius, ws);
                    const double b = y(h + i - kRadius, ws);
                    mx += k * a;
                    my += k * b;
                    xx += k * a * a;
                    yy += k * b * b;
                    xy += k * a * b;
                }
            }
            const double vx = xx - mx * mx;
            const double vy = yy - my * my;
            const double cxy = xy - mx * my;
            sum += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    }
    return sum / count;
}

double absrel(const ErpGrid& pred, const ErpGrid& gt, const ErpGrid* validity) {
    double sum = 0.0;
    long n = 0;
    for_valid(pred, gt, validity, "absrel", [&](double p, double g) {
        sum += std::abs(p - g) / g;
        ++n;
    });
    return sum / n;
}

double rmse_mm(const ErpGrid& pred, const ErpGrid& gt, const ErpGrid* validity) {
    double sum = 0.0;
    long n = 0;
    for_valid(pred, gt, validity, "rmse", [&](double p, double g) {
        sum += (p - g) * (p - g);
        ++n;
    });
    return 1000.0 * std::sqrt(sum / n);
}

double layout_iou2d(const Polygon& a, const Polygon& b) {
    require_polygon(a);
    require_polygon(b);
    Eigen::Vector2d lo = a.front();
    Eigen::Vector2d hi = a.front();
    for (const Polygon* p : {&a, &b}) {
        for (const auto& v : *p) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
    }
    const Raster r{lo, (hi - lo) / kIouRaster};
    const std::vector<std::uint8_t> ra = rasterise(a, r);
    const std::vector<std::uint8_t> rb = rasterise(b, r);
    long inter = 0;
    long uni = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        inter += ra[i] & rb[i];
        uni += ra[i] | rb[i];
    }
    return uni == 0 ? 0.0 : double(inter) / double(uni);
}

double layout_iou2d(const SceneAnnotation& a, const SceneAnnotation& b) {
    return layout_iou2d(a.corners_xz, b.corners_xz);
}

Polygon extract_floor_polygon(const ErpGrid& depth, double camera_height, const FloorExtractionOptions& options,
                              const ErpGrid* validity) {
    if (depth.channels() != 1) {
        throw DimensionError("extract_floor_polygon: expected single-channel depth");
    }
    if (options.rays < 3 || !(options.depression > 0.0) || !(options.depression < std::numbers::pi / 2)) {
        throw ParameterError("extract_floor_polygon: need >= 3 rays and a depression in (0, 90) degrees");
    }
    if (!(camera_height > 0.0)) {
        throw ParameterError("extract_floor_polygon: camera height must be positive");
    }
    if (validity != nullptr && !validity->same_shape(depth)) {
        throw DimensionError("extract_floor_polygon: validity mask differs in shape");
    }
    Polygon out;
    int invalid = 0;
    for (int i = 0; i < options.rays; ++i) {
        const double theta = -std::numbers::pi + 2 * std::numbers::pi * (i + 0.5) / options.rays;
        bool valid = false;
        double r = horizontal_distance(depth, validity, -options.depression, theta, valid);
        if (valid && -r * std::tan(options.depression) <= -0.99 * camera_height) {
            r = horizontal_distance(depth, validity, 0.0, theta, valid);
        }
        if (!valid) {
            ++invalid;
            continue;
        }
        out.emplace_back(r * std::sin(theta), r * std::cos(theta));
    }
    if (invalid * 10 > options.rays) {
        throw DataError("extract_floor_polygon: " + std::to_string(invalid) + " of " + std::to_string(options.rays) +
                        " rays hit invalid depth");
    }
    return out;
}

CornerError corner_error(const Polygon& pred, const Polygon& gt) {
    if (pred.empty() || gt.empty()) {
        throw ParameterError("corner_error: empty corner set");
    }
    Eigen::Vector2d lo = gt.front();
    Eigen::Vector2d hi = gt.front();
    for (const auto& v : gt) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const double diagonal = (hi - lo).norm();
    if (!(diagonal > 0.0)) {
        throw ParameterError("corner_error: ground-truth corners have zero extent");
    }
    CornerError out;
    if (pred.size() != gt.size()) {
        const Polygon& small = pred.size() < gt.size() ? pred : gt;
        const Polygon& large = pred.size() < gt.size() ? gt : pred;
        double sum = 0.0;
        for (const auto& p : small) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : large) {
                best = std::min(best, (p - q).norm());
            }
            sum += best;
        }
        out.value = sum / double(small.size()) / diagonal;
        out.count_mismatch = true;
        return out;
    }
    const std::size_t n = gt.size();
    double best = std::numeric_limits<double>::infinity();
    for (const int dir : {1, -1}) {
        for (std::size_t offset = 0; offset < n; ++offset) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t j = dir > 0 ? (offset + i) % n : (offset + n - i) % n;
                sum += (pred[j] - gt[i]).norm();
            }
            best = std::min(best, sum / double(n));
        }
    }
    out.value = best / diagonal;
    return out;
}

}  // namespace panorad
