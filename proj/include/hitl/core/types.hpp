#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hitl {

using Label = std::uint8_t;

inline constexpr Label kBackground = 0;
inline constexpr Label kOrganA = 1;
inline constexpr Label kOrganB = 2;
inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<Label, 2> kOrganClasses = {kOrganA, kOrganB};

/// Voxel counts, z-major: depth is the outermost axis, width the innermost.
struct Dims {
    std::size_t depth = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t voxel_count() const { return depth * height * width; }
    std::size_t index(std::size_t z, std::size_t y, std::size_t x) const {
        return (z * height + y) * width + x;
    }
    bool valid() const { return depth >= 1 && height >= 1 && width >= 1; }

    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Millimetres per voxel along (z, y, x).
struct Spacing {
    double z = 1.0;
    double y = 1.0;
    double x = 1.0;

    bool valid() const { return z > 0.0 && y > 0.0 && x > 0.0; }

    friend bool operator==(const Spacing&, const Spacing&) = default;
};

std::string to_string(const Dims& dims);

/// Scalar intensity grid in Hounsfield-like units. Stored in double so that
/// derived volumes (normalised intensities) keep full precision; the on-disk
/// format carries float32.
class Volume {
  public:
    Volume() = default;
    /// Throws rejected_input when dims/spacing are invalid, the voxel count
    /// does not match, or any voxel is non-finite.
    Volume(Dims dims, Spacing spacing, std::vector<double> voxels);

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    std::span<const double> voxels() const { return voxels_; }
    double at(std::size_t z, std::size_t y, std::size_t x) const {
        return voxels_[dims_.index(z, y, x)];
    }

    friend bool operator==(const Volume&, const Volume&) = default;

  private:
    Dims dims_;
    Spacing spacing_;
    std::vector<double> voxels_;
};

/// Per-voxel class codes in {0, 1, 2}, z-major.
class LabelMap {
  public:
    LabelMap() = default;
    /// All-background map.
    explicit LabelMap(Dims dims);
    /// Throws rejected_input on a count mismatch or a code outside {0,1,2}.
    LabelMap(Dims dims, std::vector<Label> labels);

    const Dims& dims() const { return dims_; }
    std::span<const Label> labels() const { return labels_; }
    Label at(std::size_t z, std::size_t y, std::size_t x) const {
        return labels_[dims_.index(z, y, x)];
    }
    Label operator[](std::size_t i) const { return labels_[i]; }
    void set(std::size_t i, Label value);

    std::size_t count(Label value) const;

    friend bool operator==(const LabelMap&, const LabelMap&) = default;

  private:
    Dims dims_;
    std::vector<Label> labels_;
};

enum class SampleStatus { unlabelled, machine_labelled, refined };

std::string_view to_string(SampleStatus status);

struct Sample {
    std::string id;
    Volume volume;
    std::optional<LabelMap> ground_truth;
    std::optional<LabelMap> prediction;
    std::optional<LabelMap> annotation;
    SampleStatus status = SampleStatus::unlabelled;
    std::optional<double> annotation_time_min;
    std::optional<int> round_annotated;
};

/// Throws contract_violation when the status/annotation/time triple or the
/// prediction dims are inconsistent.
void validate(const Sample& sample);

enum class Role { seed, target, test };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

struct Dataset {
    Role role = Role::seed;
    std::vector<Sample> samples;
};

/// Per-class Dice for the two organ classes.
struct DiceScore {
    std::array<double, 2> per_class{1.0, 1.0};

    double of(Label organ) const { return per_class.at(organ - 1); }
    double mean() const { return 0.5 * (per_class[0] + per_class[1]); }

    friend bool operator==(const DiceScore&, const DiceScore&) = default;
};

} // namespace hitl
