// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#include "pagas/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace pagas {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

bool host_is_little_endian() {
    const uint32_t probe = 1;
    return *reinterpret_cast<const uint8_t*>(&probe) == 1;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// PFM

DepthMap load_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "Pf") fail(path + ": corrupt PFM header (expected Pf)");
    int w = 0, h = 0;
    double scale = 0.0;
    in >> w >> h >> scale;
    if (!in || w <= 0 || h <= 0 || scale == 0.0)
        fail(path + ": corrupt PFM header");
    in.get();  // single whitespace byte before the raster

    const bool file_little = scale < 0.0;
    std::vector<float> row(w);
    DepthMap depth(w, h);
    for (int r = h - 1; r >= 0; --r) {  // bottom-up row order
        in.read(reinterpret_cast<char*>(row.data()), std::streamsize(w * sizeof(float)));
        if (!in) fail(path + ": truncated PFM raster");
        for (int c = 0; c < w; ++c) {
            float f = row[c];
            if (file_little != host_is_little_endian()) {
                uint32_t bits;
                std::memcpy(&bits, &f, 4);
                bits = __builtin_bswap32(bits);
                std::memcpy(&f, &bits, 4);
            }
            if (std::isfinite(f) && f > 0.0f) depth.set(r, c, double(f));
        }
    }
    return depth;
}

void save_pfm(const std::string& path, const DepthMap& depth) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write " + path);
    out << "Pf\n" << depth.width() << " " << depth.height() << "\n"
        << (host_is_little_endian() ? "-1.0" : "1.0") << "\n";
    std::vector<float> row(depth.width());
    for (int r = depth.height() - 1; r >= 0; --r) {
        for (int c = 0; c < depth.width(); ++c)
            row[c] = depth.valid_at(r, c) ? float(depth.values.at(r, c)) : 0.0f;
        out.write(reinterpret_cast<const char*>(row.data()),
                  std::streamsize(row.size() * sizeof(float)));
    }
}

// ---------------------------------------------------------------------------
// PNG via libpng

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;

    explicit PngReader(const std::string& path) {
        fp = std::fopen(path.c_str(), "rb");
        if (!fp) fail("cannot open " + path);
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        info = png_create_info_struct(png);
        if (!png || !info || setjmp(png_jmpbuf(png))) {
            cleanup();
            fail(path + ": corrupt PNG");
        }
        png_init_io(png, fp);
        png_read_info(png, info);
    }
    ~PngReader() { cleanup(); }
    void cleanup() {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        if (fp) std::fclose(fp);
        fp = nullptr;
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;

    explicit PngWriter(const std::string& path) {
        fp = std::fopen(path.c_str(), "wb");
        if (!fp) fail("cannot write " + path);
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        info = png_create_info_struct(png);
        if (!png || !info || setjmp(png_jmpbuf(png))) {
            cleanup();
            fail(path + ": PNG write failed");
        }
        png_init_io(png, fp);
    }
    ~PngWriter() { cleanup(); }
    void cleanup() {
        if (png) png_destroy_write_struct(&png, &info);
        if (fp) std::fclose(fp);
        fp = nullptr;
    }
};

Grid<uint16_t> load_png_gray16(const std::string& path) {
    PngReader rd(path);
    if (setjmp(png_jmpbuf(rd.png))) fail(path + ": corrupt PNG");
    const int w = int(png_get_image_width(rd.png, rd.info));
    const int h = int(png_get_image_height(rd.png, rd.info));
    if (png_get_bit_depth(rd.png, rd.info) != 16 ||
        png_get_color_type(rd.png, rd.info) != PNG_COLOR_TYPE_GRAY)
        fail(path + ": expected 16-bit grayscale PNG");
    if (host_is_little_endian()) png_set_swap(rd.png);
    png_read_update_info(rd.png, rd.info);

    Grid<uint16_t> img(w, h, 0);
    std::vector<png_bytep> rows(h);
    for (int r = 0; r < h; ++r)
        rows[r] = reinterpret_cast<png_bytep>(&img.at(r, 0));
    png_read_image(rd.png, rows.data());
    return img;
}

void save_png_gray16(const std::string& path, const Grid<uint16_t>& img) {
    PngWriter wr(path);
    if (setjmp(png_jmpbuf(wr.png))) fail(path + ": PNG write failed");
    png_set_IHDR(wr.png, wr.info, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    if (host_is_little_endian()) png_set_swap(wr.png);
    for (int r = 0; r < img.height; ++r)
        png_write_row(wr.png, reinterpret_cast<png_const_bytep>(&img.at(r, 0)));
    png_write_end(wr.png, nullptr);
}

Grid<std::array<uint8_t, 3>> load_png_rgb8(const std::string& path) {
    PngReader rd(path);
    if (setjmp(png_jmpbuf(rd.png))) fail(path + ": corrupt PNG");
    const int w = int(png_get_image_width(rd.png, rd.info));
    const int h = int(png_get_image_height(rd.png, rd.info));
    // Normalize anything to 8-bit RGB.
    png_set_expand(rd.png);
    if (png_get_bit_depth(rd.png, rd.info) == 16) png_set_strip_16(rd.png);
    png_set_strip_alpha(rd.png);
    const auto color = png_get_color_type(rd.png, rd.info);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(rd.png);
    png_read_update_info(rd.png, rd.info);

    Grid<std::array<uint8_t, 3>> img(w, h);
    std::vector<png_bytep> rows(h);
    for (int r = 0; r < h; ++r)
        rows[r] = reinterpret_cast<png_bytep>(img.at(r, 0).data());
    png_read_image(rd.png, rows.data());
    return img;
}

void save_png_rgb8(const std::string& path, const Grid<std::array<uint8_t, 3>>& img) {
    PngWriter wr(path);
    if (setjmp(png_jmpbuf(wr.png))) fail(path + ": PNG write failed");
    png_set_IHDR(wr.png, wr.info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    for (int r = 0; r < img.height; ++r)
        png_write_row(wr.png, reinterpret_cast<png_const_bytep>(img.at(r, 0).data()));
    png_write_end(wr.png, nullptr);
}

uint8_t to_byte(double v) {
    return uint8_t(std::clamp(std::lround(v * 255.0), 0l, 255l));
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Depth maps

DepthMap load_depth(const std::string& path) {
    if (ends_with(path, ".pfm")) return load_pfm(path);
    if (!ends_with(path, ".png")) fail(path + ": depth extension must be .pfm or .png");

    std::ifstream side(path + ".json");
    if (!side) fail(path + ": missing sidecar " + path + ".json");
    nlohmann::json meta = nlohmann::json::parse(side);
    const double scale = meta.at("scale").get<double>();
    const double offset = meta.value("offset", 0.0);

    const Grid<uint16_t> raw = load_png_gray16(path);
    DepthMap depth(raw.width, raw.height);
    for (int r = 0; r < raw.height; ++r)
        for (int c = 0; c < raw.width; ++c) {
            if (raw.at(r, c) == 0) continue;  // 0 reserved for invalid
            const double d = raw.at(r, c) * scale + offset;
            if (std::isfinite(d) && d > 0.0) depth.set(r, c, d);
        }
    return depth;
}

void save_depth(const std::string& path, const DepthMap& depth, double png_scale,
                double png_offset) {
    if (ends_with(path, ".pfm")) {
        save_pfm(path, depth);
        return;
    }
    if (!ends_with(path, ".png")) fail(path + ": depth extension must be .pfm or .png");

    Grid<uint16_t> raw(depth.width(), depth.height(), 0);
    for (int r = 0; r < depth.height(); ++r)
        for (int c = 0; c < depth.width(); ++c) {
            if (!depth.valid_at(r, c)) continue;
            const double q = (depth.values.at(r, c) - png_offset) / png_scale;
            raw.at(r, c) = uint16_t(std::clamp(std::lround(q), 1l, 65535l));
        }
    save_png_gray16(path, raw);

    nlohmann::json meta{{"scale", png_scale}, {"offset", png_offset}};
    std::ofstream side(path + ".json");
    side << meta.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Images, masks, normals

ColorImage load_image_png(const std::string& path) {
    const auto raw = load_png_rgb8(path);
    ColorImage img(raw.width, raw.height);
    for (size_t i = 0; i < raw.data.size(); ++i)
        img.data[i] = {raw.data[i][0] / 255.0, raw.data[i][1] / 255.0,
                       raw.data[i][2] / 255.0};
    return img;
}

void save_image_png(const std::string& path, const ColorImage& image) {
    Grid<std::array<uint8_t, 3>> raw(image.width, image.height);
    for (size_t i = 0; i < image.data.size(); ++i)
        raw.data[i] = {to_byte(image.data[i].x), to_byte(image.data[i].y),
                       to_byte(image.data[i].z)};
    save_png_rgb8(path, raw);
}

Mask load_mask_png(const std::string& path) {
    const auto raw = load_png_rgb8(path);
    Mask mask(raw.width, raw.height, 0);
    for (size_t i = 0; i < raw.data.size(); ++i)
        mask.data[i] = (raw.data[i][0] | raw.data[i][1] | raw.data[i][2]) != 0;
    return mask;
}

void save_normal_png(const NormalMap& nmap, const std::string& path) {
    Grid<std::array<uint8_t, 3>> raw(nmap.width(), nmap.height(),
                                     std::array<uint8_t, 3>{0, 0, 0});
    for (int r = 0; r < nmap.height(); ++r)
        for (int c = 0; c < nmap.width(); ++c) {
            if (!nmap.valid_at(r, c)) continue;
            const Vec3& n = nmap.normals.at(r, c);
            raw.at(r, c) = {uint8_t(std::clamp(std::lround(255.0 * (n.x + 1.0) / 2.0), 0l, 255l)),
                            uint8_t(std::clamp(std::lround(255.0 * (n.y + 1.0) / 2.0), 0l, 255l)),
                            uint8_t(std::clamp(std::lround(255.0 * (n.z + 1.0) / 2.0), 0l, 255l))};
        }
    save_png_rgb8(path, raw);
}

// ---------------------------------------------------------------------------
// COLMAP text cameras

LoadedCameras load_cameras(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string cam_path = (fs::path(dir) / "cameras.txt").string();
    const std::string img_path = (fs::path(dir) / "images.txt").string();

    std::ifstream cam_file(cam_path);
    if (!cam_file) fail("cannot open " + cam_path);

    std::unordered_map<long, CameraIntrinsics> cams;
    std::string line;
    long line_no = 0;
    while (std::getline(cam_file, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        long cam_id = 0;
        std::string model;
        if (!(ss >> cam_id >> model))
            fail(cam_path + ":" + std::to_string(line_no) + ": malformed camera line");
        if (model != "PINHOLE")
            fail(cam_path + ":" + std::to_string(line_no) +
                 ": unsupported camera model " + model + " (only PINHOLE)");
        CameraIntrinsics intr;
        if (!(ss >> intr.width >> intr.height >> intr.fx >> intr.fy >> intr.cx >> intr.cy))
            fail(cam_path + ":" + std::to_string(line_no) + ": malformed PINHOLE params");
        if (!intr.valid())
            fail(cam_path + ":" + std::to_string(line_no) + ": invalid intrinsics");
        cams[cam_id] = intr;
    }
    if (cams.empty()) fail(cam_path + ": no cameras");

    std::ifstream img_file(img_path);
    if (!img_file) fail("cannot open " + img_path);

    LoadedCameras out;
    line_no = 0;
    bool expecting_points_line = false;
    while (std::getline(img_file, line)) {
        ++line_no;
        if (expecting_points_line) {  // 2D point observations; ignored
            expecting_points_line = false;
            continue;
        }
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        long image_id = 0, cam_id = 0;
        double qw, qx, qy, qz, tx, ty, tz;
        std::string name;
        if (!(ss >> image_id >> qw >> qx >> qy >> qz >> tx >> ty >> tz >> cam_id >> name))
            fail(img_path + ":" + std::to_string(line_no) + ": malformed image line");
        auto it = cams.find(cam_id);
        if (it == cams.end())
            fail(img_path + ":" + std::to_string(line_no) + ": unknown camera id " +
                 std::to_string(cam_id));
        // COLMAP convention: p_cam = R_cw p_world + t.
        const Mat3 r_cw = rotation_from_quaternion(qw, qx, qy, qz);
        CameraPose pose;
        pose.rotation = r_cw.transpose();
        pose.translation = -(pose.rotation * Vec3{tx, ty, tz});
        out.intrinsics.push_back(it->second);
        out.poses.push_back(pose);
        out.names.push_back(name);
        expecting_points_line = true;
    }
    if (out.names.empty()) fail(img_path + ": no images");
    return out;
}

void save_cameras(const std::string& dir, const LoadedCameras& cams) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream cam_file(fs::path(dir) / "cameras.txt");
    cam_file << "# CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]\n";
    for (size_t i = 0; i < cams.intrinsics.size(); ++i) {
        const CameraIntrinsics& intr = cams.intrinsics[i];
        cam_file << (i + 1) << " PINHOLE " << intr.width << " " << intr.height << " "
                 << format_double(intr.fx) << " " << format_double(intr.fy) << " "
                 << format_double(intr.cx) << " " << format_double(intr.cy) << "\n";
    }
    std::ofstream img_file(fs::path(dir) / "images.txt");
    img_file << "# IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME\n";
    for (size_t i = 0; i < cams.poses.size(); ++i) {
        const CameraPose& pose = cams.poses[i];
        const Mat3 r_cw = pose.rotation.transpose();
        const Vec3 t = -(r_cw * pose.translation);
        double q[4];
        quaternion_from_rotation(r_cw, q);
        img_file << (i + 1) << " " << format_double(q[0]) << " " << format_double(q[1])
                 << " " << format_double(q[2]) << " " << format_double(q[3]) << " "
                 << format_double(t.x) << " " << format_double(t.y) << " "
                 << format_double(t.z) << " " << (i + 1) << " " << cams.names[i]
                 << "\n\n";
    }
}

// ---------------------------------------------------------------------------
// PLY

void save_mesh_ply(const std::string& path, const TriangleMesh& mesh, bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write " + path);
    const bool colored = !mesh.colors.empty();

    out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii")
        << " 1.0\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    if (colored)
        out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out << "element face " << mesh.triangles.size() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";

    if (binary) {
        for (size_t i = 0; i < mesh.vertices.size(); ++i) {
            const float xyz[3] = {float(mesh.vertices[i].x), float(mesh.vertices[i].y),
                                  float(mesh.vertices[i].z)};
            out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
            if (colored) {
                const uint8_t rgb[3] = {to_byte(mesh.colors[i].x), to_byte(mesh.colors[i].y),
                                        to_byte(mesh.colors[i].z)};
                out.write(reinterpret_cast<const char*>(rgb), sizeof(rgb));
            }
        }
        for (const auto& tri : mesh.triangles) {
            const uint8_t n = 3;
            const int32_t idx[3] = {tri[0], tri[1], tri[2]};
            out.write(reinterpret_cast<const char*>(&n), 1);
            out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
        }
    } else {
        for (size_t i = 0; i < mesh.vertices.size(); ++i) {
            out << float(mesh.vertices[i].x) << " " << float(mesh.vertices[i].y) << " "
                << float(mesh.vertices[i].z);
            if (colored)
                out << " " << int(to_byte(mesh.colors[i].x)) << " "
                    << int(to_byte(mesh.colors[i].y)) << " "
                    << int(to_byte(mesh.colors[i].z));
            out << "\n";
        }
        for (const auto& tri : mesh.triangles)
            out << "3 " << tri[0] << " " << tri[1] << " " << tri[2] << "\n";
    }
}

// ---------------------------------------------------------------------------
// Config files

namespace {

std::vector<int> parse_int_list(const std::string& value) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stoi(tok));
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

bool parse_bool(const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw std::invalid_argument("not a bool: " + value);
}

std::string join_ints(const std::vector<int>& values) {
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(values[i]);
    }
    return out;
}

}  // namespace

void apply_config_entry(RefineConfig& cfg, const std::string& key,
                        const std::string& value) {
    if (key == "n_context") cfg.n_context = std::stoi(value);
    else if (key == "pyramid_iters") cfg.pyramid_iters = parse_int_list(value);
    else if (key == "pyramid_factors") cfg.pyramid_factors = parse_int_list(value);
    else if (key == "lr_init") cfg.lr_init = std::stod(value);
    else if (key == "lr_stop") cfg.lr_stop = std::stod(value);
    else if (key == "lr_factor") cfg.lr_factor = std::stod(value);
    else if (key == "patience") cfg.patience = std::stoi(value);
    else if (key == "radius_threshold") cfg.radius_threshold = std::stod(value);
    else if (key == "depth_slices") cfg.depth_slices = std::stoi(value);
    else if (key == "lambda_c") cfg.weights.lambda_c = std::stod(value);
    else if (key == "lambda_s") cfg.weights.lambda_s = std::stod(value);
    else if (key == "grad_min") cfg.weights.grad_min = std::stod(value);
    else if (key == "grad_max") cfg.weights.grad_max = std::stod(value);
    else if (key == "alpha_cap") cfg.alpha_cap = std::stod(value);
    else if (key == "half_exponent") cfg.half_exponent = parse_bool(value);
    else if (key == "exposure") cfg.exposure = parse_bool(value);
    else if (key == "consistency_check") cfg.consistency_check = parse_bool(value);
    else if (key == "consistency_tau") cfg.consistency_tau = std::stod(value);
    else if (key == "consistency_min_views") cfg.consistency_min_views = std::stoi(value);
    else if (key == "clamp_delta") cfg.clamp_delta = std::stod(value);
    else if (key == "depth_floor") cfg.depth_floor = std::stod(value);
    else if (key == "fov_ratio") cfg.fov_ratio = std::stod(value);
    else if (key == "warp_radius") cfg.warp_radius = std::stod(value);
    else if (key == "freeze_scale_grad") cfg.freeze_scale_grad = parse_bool(value);
    else if (key == "z_near") cfg.z_near = std::stod(value);
    else if (key == "tile_size") cfg.tile_size = std::stoi(value);
    else throw std::invalid_argument("unknown config key: " + key);
}

void apply_config_file(RefineConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open config " + path);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            fail(path + ":" + std::to_string(line_no) + ": expected key = value");
        try {
            apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const std::exception& e) {
            fail(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::vector<std::pair<std::string, std::string>> config_entries(const RefineConfig& cfg) {
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    return {
        {"n_context", std::to_string(cfg.n_context)},
        {"pyramid_iters", join_ints(cfg.pyramid_iters)},
        {"pyramid_factors", join_ints(cfg.pyramid_factors)},
        {"lr_init", format_double(cfg.lr_init)},
        {"lr_stop", format_double(cfg.lr_stop)},
        {"lr_factor", format_double(cfg.lr_factor)},
        {"patience", std::to_string(cfg.patience)},
        {"radius_threshold", format_double(cfg.radius_threshold)},
        {"depth_slices", std::to_string(cfg.depth_slices)},
        {"lambda_c", format_double(cfg.weights.lambda_c)},
        {"lambda_s", format_double(cfg.weights.lambda_s)},
        {"grad_min", format_double(cfg.weights.grad_min)},
        {"grad_max", format_double(cfg.weights.grad_max)},
        {"alpha_cap", format_double(cfg.alpha_cap)},
        {"half_exponent", b(cfg.half_exponent)},
        {"exposure", b(cfg.exposure)},
        {"consistency_check", b(cfg.consistency_check)},
        {"consistency_tau", format_double(cfg.consistency_tau)},
        {"consistency_min_views", std::to_string(cfg.consistency_min_views)},
        {"clamp_delta", format_double(cfg.clamp_delta)},
        {"depth_floor", format_double(cfg.depth_floor)},
        {"fov_ratio", format_double(cfg.fov_ratio)},
        {"warp_radius", format_double(cfg.warp_radius)},
        {"freeze_scale_grad", b(cfg.freeze_scale_grad)},
        {"z_near", format_double(cfg.z_near)},
        {"tile_size", std::to_string(cfg.tile_size)},
    };
}

void save_run_log(const std::string& path, const RefineDiagnostics& diag) {
    std::ofstream out(path);
    if (!out) fail("cannot write " + path);
    for (const IterationRecord& rec : diag.log) {
        nlohmann::json j{{"level", rec.level},   {"iter", rec.iter},
                         {"loss_c", rec.loss_c}, {"loss_s", rec.loss_s},
                         {"lr", rec.lr},         {"gate_skips", rec.gate_skips}};
        out << j.dump() << "\n";
    }
    nlohmann::json summary{{"wall_seconds", diag.wall_seconds},
                           {"grad_skipped", diag.grad_skipped},
                           {"singular_skips", diag.singular_skips},
                           {"warning", diag.warning}};
    out << summary.dump() << "\n";
}

}  // namespace pagas
