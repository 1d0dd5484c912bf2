#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "multidx/cnn.hpp"
#include "multidx/matrix.hpp"
#include "multidx/stacking.hpp"
#include "multidx/tabular.hpp"

namespace multidx::modelstore {

inline constexpr std::array<char, 8> kMagic{'M', 'D', 'X', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kFormatVersion = 1;
/// magic, version, mode, payload length, CRC-32
inline constexpr std::size_t kHeaderSize = 8 + 4 + 4 + 8 + 4;

enum class Mode : std::uint32_t {
    Symptoms = 0,
    Cough = 1,
    Blood25 = 2,
    Blood5 = 3,
    Raman = 4,
    Ecg = 5,
    Mortality7 = 6,
    Mortality9 = 7,
};

inline constexpr std::array<Mode, 8> kAllModes{Mode::Symptoms, Mode::Cough,  Mode::Blood25,    Mode::Blood5,
                                              Mode::Raman,    Mode::Ecg,    Mode::Mortality7, Mode::Mortality9};

std::string_view to_string(Mode mode) noexcept;
std::optional<Mode> mode_from_string(std::string_view text) noexcept;

enum class InputKind { Tabular, Audio, Image };
InputKind input_kind(Mode mode) noexcept;
bool is_mortality(Mode mode) noexcept;

/// Everything needed to turn a raw feature row into model input.
struct TabularPreprocessing {
    /// Request keys, in row order (the keep-list).
    tabular::FeatureSchema input_schema;
    tabular::OneHotEncoder encoder;
    /// Encoded rows the imputer searches for neighbors.
    Matrix imputer_donors;
    std::size_t imputer_k = 5;
    tabular::StandardScaler scaler;
};

enum class ImageKind : std::uint32_t { RamanTrace = 0, EcgReport = 1 };

struct ImageDescriptor {
    ImageKind kind = ImageKind::RamanTrace;
    std::size_t size = 0;  // square model input side

    friend bool operator==(const ImageDescriptor&, const ImageDescriptor&) = default;
};

struct Artifact {
    Mode mode = Mode::Symptoms;
    std::string model_version;
    std::optional<TabularPreprocessing> tabular;  // tabular and audio modes
    std::optional<ImageDescriptor> image;         // image modes
    std::variant<stacking::StackedModel, cnn::CnnModel> model;

    /// Throws ErrorCode::Format when parts disagree with each other or the mode.
    void validate() const;
};

/// Canonical encoding: equal artifacts give equal bytes.
std::vector<std::uint8_t> serialize(const Artifact& artifact);
Artifact deserialize(std::span<const std::uint8_t> bytes);

void save(const Artifact& artifact, const std::filesystem::path& path);
Artifact load(const std::filesystem::path& path);

}  // namespace multidx::modelstore
