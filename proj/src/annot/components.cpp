#include "hitl/annot/components.hpp"

#include "hitl/core/error.hpp"

namespace hitl::annot {

ComponentLabels label_components(std::span<const std::uint8_t> mask, const Dims& dims) {
    if (mask.size() != dims.voxel_count()) {
        throw Error(ErrorCode::rejected_input, "components: mask size does not match dims");
    }
    ComponentLabels out{std::vector<std::uint32_t>(mask.size(), 0), 0};
    std::vector<std::size_t> stack;
    const long d = long(dims.depth), h = long(dims.height), w = long(dims.width);
    for (std::size_t seed = 0; seed < mask.size(); ++seed) {
        if (!mask[seed] || out.ids[seed] != 0) continue;
        const auto id = static_cast<std::uint32_t>(++out.count);
        out.ids[seed] = id;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            const long z = long(i) / (h * w), y = (long(i) / w) % h, x = long(i) % w;
            for (long dz = -1; dz <= 1; ++dz)
                for (long dy = -1; dy <= 1; ++dy)
                    for (long dx = -1; dx <= 1; ++dx) {
                        const long nz = z + dz, ny = y + dy, nx = x + dx;
                        if (nz < 0 || ny < 0 || nx < 0 || nz >= d || ny >= h || nx >= w) continue;
                        const auto j = static_cast<std::size_t>((nz * h + ny) * w + nx);
                        if (mask[j] && out.ids[j] == 0) {
                            out.ids[j] = id;
                            stack.push_back(j);
                        }
                    }
        }
    }
    return out;
}

std::size_t count_components(std::span<const std::uint8_t> mask, const Dims& dims) {
    return label_components(mask, dims).count;
}

} // namespace hitl::annot
