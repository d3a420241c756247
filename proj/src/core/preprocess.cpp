#include "hitl/core/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace hitl {

Volume preprocess(const Volume& volume) {
    const auto in = volume.voxels();
    std::vector<double> out(in.size());
    std::transform(in.begin(), in.end(), out.begin(), [](double v) {
        return std::clamp(v, double(kClampLow), double(kClampHigh));
    });

    double sum = 0.0;
    for (double v : out) sum += v;
    const double mean = sum / static_cast<double>(out.size());
    double sq = 0.0;
    for (double v : out) sq += (v - mean) * (v - mean);
    const double stddev = std::sqrt(sq / static_cast<double>(out.size()));

    if (stddev > 0.0) {
        for (double& v : out) v = (v - mean) / stddev;
    } else {
        std::fill(out.begin(), out.end(), 0.0);
    }
    return Volume(volume.dims(), volume.spacing(), std::move(out));
}

} // namespace hitl
