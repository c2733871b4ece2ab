#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "mgst/image.hpp"

namespace mgst {

/// Label value -> mask channel index. A channel of -1 drops the label
/// (typically the background). Parsed from "label=channel[,label=channel...]"
/// where channel may also be "skip".
class ChannelMap {
public:
    ChannelMap() = default;

    void assign(std::uint8_t label, int channel);
    /// Channel for a label, or -1 if the label is dropped. Throws
    /// UnknownLabelError if the label has no entry at all.
    int channel_for(std::uint8_t label) const;
    /// Number of mask channels (max assigned channel + 1).
    int channel_count() const;
    bool empty() const { return entries_.empty(); }

    static ChannelMap parse(const std::string& text);

private:
    std::map<std::uint8_t, int> entries_;
};

/// Default mapping: label 0 ignored, label 1 -> channel 0.
ChannelMap default_channel_map();

/// Reads an 8-bit RGB PNG. Throws IoError on unreadable files and
/// FormatError on other color types or bit depths.
template <typename T>
Image<T> load_rgb_png(const std::filesystem::path& path);

/// Reads an 8-bit grayscale or paletted PNG as raw label values.
Image<std::uint8_t> load_label_png(const std::filesystem::path& path);

/// Loads an image and its label mask and assembles the RGB-mask pair.
/// Mask channels are binary {0,1} per the channel map.
template <typename T>
RgbMaskPair<T> load_rgb_mask_pair(const std::filesystem::path& image_path,
                                  const std::filesystem::path& mask_path,
                                  const ChannelMap& channel_map);

/// Writes an 8-bit RGB PNG; values are rounded to the nearest integer and
/// must already lie in [0, 255].
template <typename T>
void save_image(const Image<T>& image, const std::filesystem::path& path);

/// Writes a mask as an 8-bit grayscale label PNG, the inverse of the channel
/// map (channel c becomes label c + 1, uncovered pixels become label 0).
/// Mask values >= 0.5 count as set.
template <typename T>
void save_label_mask(const Image<T>& mask, const std::filesystem::path& path);

} // namespace mgst
