#include "mgst/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "mgst/errors.hpp"

namespace mgst {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;

    PngReader() {
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (png)
            info = png_create_info_struct(png);
        if (!png || !info)
            throw IoError("failed to allocate PNG reader");
    }
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
    PngReader(const PngReader&) = delete;
    PngReader& operator=(const PngReader&) = delete;
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;

    PngWriter() {
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (png)
            info = png_create_info_struct(png);
        if (!png || !info)
            throw IoError("failed to allocate PNG writer");
    }
    ~PngWriter() { png_destroy_write_struct(&png, &info); }
    PngWriter(const PngWriter&) = delete;
    PngWriter& operator=(const PngWriter&) = delete;
};

struct RawPng {
    int height = 0;
    int width = 0;
    int color_type = 0;
    int bit_depth = 0;
    int channels = 0;
    std::vector<std::uint8_t> bytes; // row-major, interleaved
};

RawPng read_png(const std::filesystem::path& path, bool expand_palette) {
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f)
        throw IoError("cannot open " + path.string());

    PngReader reader;
    if (setjmp(png_jmpbuf(reader.png)))
        throw FormatError("corrupt PNG: " + path.string());
    png_init_io(reader.png, f.get());
    png_read_info(reader.png, reader.info);

    RawPng raw;
    raw.width = static_cast<int>(png_get_image_width(reader.png, reader.info));
    raw.height = static_cast<int>(png_get_image_height(reader.png, reader.info));
    raw.color_type = png_get_color_type(reader.png, reader.info);
    raw.bit_depth = png_get_bit_depth(reader.png, reader.info);

    if (raw.bit_depth == 16)
        throw FormatError("16-bit PNG not supported: " + path.string());
    if (raw.bit_depth < 8)
        png_set_packing(reader.png); // one byte per sample
    if (expand_palette && raw.color_type == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(reader.png);
    png_read_update_info(reader.png, reader.info);

    raw.channels = png_get_channels(reader.png, reader.info);
    const std::size_t rowbytes = png_get_rowbytes(reader.png, reader.info);
    raw.bytes.resize(rowbytes * raw.height);
    std::vector<png_bytep> rows(raw.height);
    for (int y = 0; y < raw.height; ++y)
        rows[y] = raw.bytes.data() + static_cast<std::size_t>(y) * rowbytes;
    png_read_image(reader.png, rows.data());
    png_read_end(reader.png, nullptr);
    return raw;
}

} // namespace

void ChannelMap::assign(std::uint8_t label, int channel) {
    if (channel < -1 || channel > 255)
        throw FormatError("mask channel index out of range");
    entries_[label] = channel;
}

int ChannelMap::channel_for(std::uint8_t label) const {
    const auto it = entries_.find(label);
    if (it == entries_.end())
        throw UnknownLabelError("mask label " + std::to_string(label) +
                                " has no channel assignment");
    return it->second;
}

int ChannelMap::channel_count() const {
    int max_channel = -1;
    for (const auto& [label, channel] : entries_)
        max_channel = std::max(max_channel, channel);
    return max_channel + 1;
}

ChannelMap ChannelMap::parse(const std::string& text) {
    ChannelMap map;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t comma = text.find(',', pos);
        const std::string entry =
            text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        const std::size_t eq = entry.find('=');
        if (eq == std::string::npos)
            throw FormatError("channel-map entry '" + entry + "' is not label=channel");
        const int label = std::stoi(entry.substr(0, eq));
        const std::string rhs = entry.substr(eq + 1);
        const int channel =
            (rhs == "skip" || rhs == "ignore" || rhs == "-1") ? -1 : std::stoi(rhs);
        if (label < 0 || label > 255)
            throw FormatError("mask label out of byte range");
        map.assign(static_cast<std::uint8_t>(label), channel);
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    if (map.channel_count() < 1)
        throw FormatError("channel map assigns no channels");
    return map;
}

ChannelMap default_channel_map() {
    ChannelMap map;
    map.assign(0, -1);
    map.assign(1, 0);
    return map;
}

template <typename T>
Image<T> load_rgb_png(const std::filesystem::path& path) {
    const RawPng raw = read_png(path, /*expand_palette=*/true);
    if (raw.color_type != PNG_COLOR_TYPE_RGB &&
        raw.color_type != PNG_COLOR_TYPE_PALETTE)
        throw FormatError("expected an 8-bit RGB PNG: " + path.string());
    if (raw.channels != 3)
        throw FormatError("expected 3 channels in " + path.string());
    Image<T> out(raw.height, raw.width, 3);
    for (std::size_t i = 0; i < raw.bytes.size(); ++i)
        out.data()[i] = static_cast<T>(raw.bytes[i]);
    return out;
}

Image<std::uint8_t> load_label_png(const std::filesystem::path& path) {
    const RawPng raw = read_png(path, /*expand_palette=*/false);
    if (raw.color_type != PNG_COLOR_TYPE_GRAY &&
        raw.color_type != PNG_COLOR_TYPE_PALETTE)
        throw FormatError("label mask must be a grayscale or paletted PNG: " +
                          path.string());
    if (raw.channels != 1)
        throw FormatError("label mask must have a single channel: " + path.string());
    Image<std::uint8_t> out(raw.height, raw.width, 1);
    for (std::size_t i = 0; i < raw.bytes.size(); ++i)
        out.data()[i] = raw.bytes[i];
    return out;
}

template <typename T>
RgbMaskPair<T> load_rgb_mask_pair(const std::filesystem::path& image_path,
                                  const std::filesystem::path& mask_path,
                                  const ChannelMap& channel_map) {
    Image<T> image = load_rgb_png<T>(image_path);
    const Image<std::uint8_t> labels = load_label_png(mask_path);
    if (labels.height() != image.height() || labels.width() != image.width())
        throw PairMismatchError("mask " + mask_path.string() +
                                " does not match image dimensions");
    if (image.height() < 8 || image.width() < 8)
        throw FormatError("images must be at least 8x8");

    const int channels = channel_map.channel_count();
    Image<T> mask(image.height(), image.width(), channels);
    for (int y = 0; y < labels.height(); ++y) {
        for (int x = 0; x < labels.width(); ++x) {
            const int channel = channel_map.channel_for(labels.at(y, x, 0));
            if (channel >= 0)
                mask.at(y, x, channel) = T(1);
        }
    }
    return RgbMaskPair<T>(std::move(image), std::move(mask));
}

template <typename T>
void save_image(const Image<T>& image, const std::filesystem::path& path) {
    if (image.channels() != 3)
        throw ShapeMismatchError("save_image expects a 3-channel image");
    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f)
        throw IoError("cannot open " + path.string() + " for writing");

    PngWriter writer;
    if (setjmp(png_jmpbuf(writer.png)))
        throw IoError("PNG write failure: " + path.string());
    png_init_io(writer.png, f.get());
    png_set_IHDR(writer.png, writer.info, image.width(), image.height(), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(writer.png, writer.info);

    std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width()) * 3);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = static_cast<double>(image.at(y, x, c));
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<std::uint8_t>(std::llround(std::clamp(v, 0.0, 255.0)));
            }
        }
        png_write_row(writer.png, row.data());
    }
    png_write_end(writer.png, nullptr);
    if (std::ferror(f.get()))
        throw IoError("write failure on " + path.string());
}

template <typename T>
void save_label_mask(const Image<T>& mask, const std::filesystem::path& path) {
    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f)
        throw IoError("cannot open " + path.string() + " for writing");

    PngWriter writer;
    if (setjmp(png_jmpbuf(writer.png)))
        throw IoError("PNG write failure: " + path.string());
    png_init_io(writer.png, f.get());
    png_set_IHDR(writer.png, writer.info, mask.width(), mask.height(), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(writer.png, writer.info);

    std::vector<std::uint8_t> row(static_cast<std::size_t>(mask.width()));
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            std::uint8_t label = 0;
            for (int c = 0; c < mask.channels(); ++c)
                if (static_cast<double>(mask.at(y, x, c)) >= 0.5)
                    label = static_cast<std::uint8_t>(c + 1);
            row[static_cast<std::size_t>(x)] = label;
        }
        png_write_row(writer.png, row.data());
    }
    png_write_end(writer.png, nullptr);
    if (std::ferror(f.get()))
        throw IoError("write failure on " + path.string());
}

template Image<float> load_rgb_png<float>(const std::filesystem::path&);
template Image<double> load_rgb_png<double>(const std::filesystem::path&);
template RgbMaskPair<float> load_rgb_mask_pair<float>(const std::filesystem::path&,
                                                      const std::filesystem::path&,
                                                      const ChannelMap&);
template RgbMaskPair<double> load_rgb_mask_pair<double>(const std::filesystem::path&,
                                                        const std::filesystem::path&,
                                                        const ChannelMap&);
template void save_image<float>(const Image<float>&, const std::filesystem::path&);
template void save_image<double>(const Image<double>&, const std::filesystem::path&);
template void save_label_mask<float>(const Image<float>&,
                                     const std::filesystem::path&);
template void save_label_mask<double>(const Image<double>&,
                                      const std::filesystem::path&);

} // namespace mgst
