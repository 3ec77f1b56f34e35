#include "foresight/pgm_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace foresight
{

namespace
{

uint16_t encode(double v, double range)
{
    const double q = std::round(std::clamp(v / range, 0.0, 1.0) * 65535.0);
    return static_cast<uint16_t>(std::min(q, 65534.0));
}

void write_raw(const std::filesystem::path& path, int w, int h, const std::vector<uint16_t>& px)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
    }
    out << "P5\n" << w << " " << h << "\n65535\n";
    for (uint16_t v : px)
    {
        const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
        out.write(bytes, 2);
    }
}

void write_sidecar(const std::filesystem::path& path, double resolution, double range)
{
    nlohmann::json meta = {
        {"resolution_m", resolution},
        {"z_range_m", range},
        {"valid_sentinel", kInvalidSentinel},
    };
    std::ofstream(sidecar_path(path)) << meta.dump(2) << "\n";
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path)
{
    return std::filesystem::path(pgm_path.string() + ".json");
}

void write_depth_pgm(const std::filesystem::path& path, const DepthImage& image, double z_range_m)
{
    if (!(z_range_m > 0.0))
    {
        throw Error(ErrorCode::InvalidArgument, "z_range must be positive");
    }
    std::vector<uint16_t> px(image.geometry().size());
    const auto data = image.data();
    const auto valid = image.valid_mask();
    for (size_t i = 0; i < px.size(); ++i)
    {
        px[i] = valid[i] ? encode(data[i], z_range_m) : kInvalidSentinel;
    }
    write_raw(path, image.width(), image.height(), px);
    write_sidecar(path, image.resolution(), z_range_m);
}

void write_variance_pgm(const std::filesystem::path& path, const UncertaintyImage& image, double range_m2)
{
    if (!(range_m2 > 0.0))
    {
        throw Error(ErrorCode::InvalidArgument, "variance range must be positive");
    }
    std::vector<uint16_t> px(image.geometry().size());
    const auto data = image.data();
    for (size_t i = 0; i < px.size(); ++i)
    {
        px[i] = encode(data[i], range_m2);
    }
    write_raw(path, image.width(), image.height(), px);
    write_sidecar(path, image.geometry().resolution, range_m2);
}

DepthImage read_depth_pgm(const std::filesystem::path& path)
{
    std::ifstream meta_in(sidecar_path(path));
    if (!meta_in)
    {
        throw Error(ErrorCode::ParseError, "missing sidecar for " + path.string());
    }
    const nlohmann::json meta = nlohmann::json::parse(meta_in);
    const double resolution = meta.at("resolution_m").get<double>();
    const double range = meta.at("z_range_m").get<double>();

    std::ifstream in(path, std::ios::binary);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (!in || magic != "P5" || maxval != 65535 || w <= 0 || h <= 0)
    {
        throw Error(ErrorCode::ParseError, "not a 16-bit P5 file: " + path.string());
    }
    in.get();
    DepthImage image(w, h, resolution);
    auto data = image.data();
    auto valid = image.valid_mask();
    for (size_t i = 0; i < data.size(); ++i)
    {
        unsigned char bytes[2];
        if (!in.read(reinterpret_cast<char*>(bytes), 2))
        {
            throw Error(ErrorCode::ParseError, "truncated pixel data in " + path.string());
        }
        const uint16_t v = static_cast<uint16_t>((bytes[0] << 8) | bytes[1]);
        valid[i] = v != kInvalidSentinel;
        data[i] = valid[i] ? v / 65535.0 * range : 0.0;
    }
    return image;
}

}  // namespace foresight
