// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/io.hpp"

#include "sixdgs/sh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sixdgs {

namespace {

void put_f32(std::string &out, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xFFu));
}

float get_f32(const unsigned char *p) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(p[b]) << (8 * b);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

std::string read_all(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed for " + path.string());
    return ss.str();
}

std::string format_doubles(const double *v, int n) {
    std::string s;
    char buf[40];
    for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), i ? " %.17g" : "%.17g", v[i]);
        s += buf;
    }
    return s;
}

struct Header {
    int version = -1;
    std::size_t count = 0;
    bool have_count = false;
    std::vector<std::string> properties;
    std::optional<Vec3> background;
    std::optional<Bbox> bbox;
    std::size_t body_offset = 0;
};

Header parse_header(const std::string &data, const std::string &where) {
    auto malformed = [&](const std::string &why) {
        return IoError(where + ": malformed scene header: " + why);
    };
    Header h;
    std::size_t pos = 0;
    int line_no     = 0;
    bool ended      = false;
    while (pos < data.size()) {
        const std::size_t nl = data.find('\n', pos);
        if (nl == std::string::npos) throw malformed("missing end_header");
        std::string line = data.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = nl + 1;
        ++line_no;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (line_no == 1) {
            if (line != "ply") throw malformed("missing ply magic");
            continue;
        }
        if (key == "format") {
            std::string fmt, ver;
            ls >> fmt >> ver;
            if (fmt != "binary_little_endian" || ver != "1.0") {
                throw malformed("unsupported format '" + line + "'");
            }
        } else if (key == "comment") {
            std::string tag;
            ls >> tag;
            if (tag == "sixdgs_version") {
                if (!(ls >> h.version)) throw malformed("unreadable version");
            } else if (tag == "background") {
                Vec3 b;
                if (!(ls >> b[0] >> b[1] >> b[2])) throw malformed("unreadable background");
                h.background = b;
            } else if (tag == "bbox") {
                Bbox b;
                if (!(ls >> b.min[0] >> b.min[1] >> b.min[2] >> b.max[0] >> b.max[1] >> b.max[2])) {
                    throw malformed("unreadable bbox");
                }
                h.bbox = b;
            }
        } else if (key == "element") {
            std::string name;
            long long n = -1;
            ls >> name >> n;
            if (name != "vertex" || h.have_count) throw malformed("unexpected element '" + line + "'");
            if (n < 0) throw malformed("bad vertex count");
            h.count      = static_cast<std::size_t>(n);
            h.have_count = true;
        } else if (key == "property") {
            std::string type, name;
            ls >> type >> name;
            if (type != "float" || name.empty()) throw malformed("unsupported property '" + line + "'");
            h.properties.push_back(name);
        } else if (key == "end_header") {
            ended = true;
            break;
        } else if (!key.empty()) {
            throw malformed("unknown header line '" + line + "'");
        }
    }
    if (!ended) throw malformed("missing end_header");
    if (!h.have_count) throw malformed("missing vertex element");
    if (h.version < 0) throw malformed("missing sixdgs_version");
    h.body_offset = pos;
    return h;
}

void validate_loaded(const Gaussian6D &g, std::size_t i, const std::string &where) {
    auto fail = [&](const char *what) {
        return ValidationError(where + ": gaussian " + std::to_string(i) + " has non-finite " + what);
    };
    if (!g.raw_mu_p.allFinite()) throw fail("position");
    if (!g.raw_mu_d.allFinite()) throw fail("direction");
    for (const double v : g.raw_L) {
        if (!std::isfinite(v)) throw fail("covariance factor");
    }
    for (const double v : g.sh) {
        if (!std::isfinite(v)) throw fail("SH coefficient");
    }
    if (std::isnan(g.raw_alpha)) throw fail("opacity");
    if (std::isnan(g.raw_lambda_opa)) throw fail("lambda_opa");
}

} // namespace

std::vector<std::string> scene_property_names() {
    std::vector<std::string> names;
    for (const char *n : param_names()) {
        std::string s(n);
        for (char &c : s) {
            if (c == '.') c = '_';
        }
        names.push_back(s);
    }
    return names;
}

void save_scene(const std::filesystem::path &path, const Scene &scene) {
    std::string out = "ply\nformat binary_little_endian 1.0\n";
    out += "comment sixdgs_version " + std::to_string(kSceneFormatVersion) + "\n";
    out += "comment background " + format_doubles(scene.background.data(), 3) + "\n";
    const double box[6] = {scene.bbox.min[0], scene.bbox.min[1], scene.bbox.min[2],
                           scene.bbox.max[0], scene.bbox.max[1], scene.bbox.max[2]};
    out += "comment bbox " + format_doubles(box, 6) + "\n";
    out += "element vertex " + std::to_string(scene.gaussians.size()) + "\n";
    for (const auto &name : scene_property_names()) out += "property float " + name + "\n";
    out += "end_header\n";
    out.reserve(out.size() + scene.gaussians.size() * kParamCount * 4);
    for (const auto &g : scene.gaussians) {
        const PackedParams p = pack(g);
        for (const double v : p) put_f32(out, static_cast<float>(v));
    }
    write_file_atomic(path, out);
}

Scene load_scene(const std::filesystem::path &path) {
    const std::string where = path.string();
    const std::string data  = read_all(path);
    const Header h          = parse_header(data, where);
    if (h.version != kSceneFormatVersion) {
        throw IoError(where + ": unknown scene format version " + std::to_string(h.version));
    }
    if (h.properties != scene_property_names()) {
        throw IoError(where + ": malformed scene header: property list does not match version " +
                      std::to_string(kSceneFormatVersion));
    }
    const std::size_t record = kParamCount * 4;
    const std::size_t body   = data.size() - h.body_offset;
    if (body != h.count * record) {
        throw IoError(where + ": count mismatch: header declares " + std::to_string(h.count) +
                      " gaussians but the body holds " + std::to_string(body / record) +
                      (body % record ? " and a partial record" : ""));
    }
    Scene scene;
    if (h.background) scene.background = *h.background;
    if (h.bbox) scene.bbox = *h.bbox;
    scene.gaussians.resize(h.count);
    const auto *bytes = reinterpret_cast<const unsigned char *>(data.data()) + h.body_offset;
    for (std::size_t i = 0; i < h.count; ++i) {
        PackedParams p;
        for (int k = 0; k < kParamCount; ++k) p[k] = get_f32(bytes + i * record + 4 * k);
        scene.gaussians[i] = unpack(p);
        validate_loaded(scene.gaussians[i], i, where);
    }
    return scene;
}

namespace {

Eigen::Quaterniond rotation_quaternion(const Mat3 &R) {
    Eigen::Quaterniond q(R);
    q.normalize();
    if (q.w() < 0.0) q.coeffs() *= -1.0;
    return q;
}

} // namespace

void export_slice(const std::filesystem::path &path,
                  const std::vector<ConditionalGaussian3D> &splats) {
    constexpr int kRest = 45;
    std::string out = "ply\nformat binary_little_endian 1.0\n";
    out += "element vertex " + std::to_string(splats.size()) + "\n";
    for (const char *n : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
        out += std::string("property float ") + n + "\n";
    }
    for (int i = 0; i < kRest; ++i) out += "property float f_rest_" + std::to_string(i) + "\n";
    out += "property float opacity\n";
    for (int i = 0; i < 3; ++i) out += "property float scale_" + std::to_string(i) + "\n";
    for (int i = 0; i < 4; ++i) out += "property float rot_" + std::to_string(i) + "\n";
    out += "end_header\n";

    constexpr double kY0 = 0.28209479177387814;
    for (const auto &s : splats) {
        ScaleRotation sr;
        if (s.scale && s.rotation) {
            sr.scale    = *s.scale;
            sr.rotation = *s.rotation;
        } else {
            sr = extract_scale_rotation(s.sigma_cond);
        }
        for (int a = 0; a < 3; ++a) put_f32(out, static_cast<float>(s.mu_cond[a]));
        for (int a = 0; a < 3; ++a) put_f32(out, 0.0f);
        // Viewers decode color as 0.5 + Y0 * f_dc.
        for (int c = 0; c < 3; ++c) put_f32(out, static_cast<float>((s.color[c] - 0.5) / kY0));
        for (int i = 0; i < kRest; ++i) put_f32(out, 0.0f);
        const double a = std::clamp(s.alpha_cond, 1e-12, 1.0 - 1e-12);
        put_f32(out, static_cast<float>(logit(a)));
        for (int i = 0; i < 3; ++i) {
            put_f32(out, static_cast<float>(std::log(std::max(sr.scale[i], 1e-12))));
        }
        const Eigen::Quaterniond q = rotation_quaternion(sr.rotation);
        put_f32(out, static_cast<float>(q.w()));
        put_f32(out, static_cast<float>(q.x()));
        put_f32(out, static_cast<float>(q.y()));
        put_f32(out, static_cast<float>(q.z()));
    }
    write_file_atomic(path, out);
}

} // namespace sixdgs
