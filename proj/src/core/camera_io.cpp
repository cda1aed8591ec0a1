// Copyright Contributors to the sixdgs project
// SPDX-License-Identifier: Apache-2.0

#include "sixdgs/io.hpp"

#include <json.hpp>

#include <fstream>

namespace sixdgs {

using nlohmann::json;

namespace {

// OpenGL cameras look down -z with y up; ours look down +z with y down.
const Mat4 kFlipYZ = Eigen::Vector4d(1.0, -1.0, -1.0, 1.0).asDiagonal();

json read_json(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw IoError("cannot parse " + path.string() + ": " + e.what());
    }
}

Mat4 parse_matrix(const json &j, const std::string &where) {
    if (!j.is_array() || j.size() != 4) throw ValidationError(where + ": transform must be 4x4");
    Mat4 m;
    for (int r = 0; r < 4; ++r) {
        if (!j[r].is_array() || j[r].size() != 4) {
            throw ValidationError(where + ": transform must be 4x4");
        }
        for (int c = 0; c < 4; ++c) {
            if (!j[r][c].is_number()) throw ValidationError(where + ": transform entry is not a number");
            m(r, c) = j[r][c].get<double>();
        }
    }
    return m;
}

void check_rigid(const Mat4 &m, const std::string &where) {
    if (!m.allFinite()) throw ValidationError(where + ": transform is not finite");
    const Mat3 R = m.topLeftCorner<3, 3>();
    if ((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-4 ||
        std::abs(R.determinant() - 1.0) > 1e-4) {
        throw ValidationError(where + ": transform is not rigid (rotation not orthonormal)");
    }
    if ((m.row(3) - Eigen::RowVector4d(0.0, 0.0, 0.0, 1.0)).cwiseAbs().maxCoeff() > 1e-6) {
        throw ValidationError(where + ": transform has a non-affine last row");
    }
}

} // namespace

Mat4 camera_to_world_gl(const Camera &cam) {
    Mat4 c2w                   = Mat4::Identity();
    c2w.topLeftCorner<3, 3>()  = cam.rotation.transpose();
    c2w.topRightCorner<3, 1>() = cam.center();
    return c2w * kFlipYZ;
}

Camera camera_from_gl(const Mat4 &c2w, double fov_x, int width, int height) {
    const Mat4 cv = c2w * kFlipYZ;
    Camera cam;
    cam.fov_x       = fov_x;
    cam.width       = width;
    cam.height      = height;
    const Mat3 R    = cv.topLeftCorner<3, 3>();
    cam.rotation    = R.transpose();
    cam.translation = -R.transpose() * Vec3(cv.topRightCorner<3, 1>());
    return cam;
}

Camera CameraSet::camera(std::size_t i, std::optional<int> w, std::optional<int> h) const {
    if (i >= frames.size()) throw ValidationError("camera index out of range");
    if (!(w || width) || !(h || height)) {
        throw ValidationError("camera set has no image size; pass width and height");
    }
    const int cw = w ? *w : *width;
    const int ch = h ? *h : *height;
    Camera cam = camera_from_gl(frames[i].camera_to_world, camera_angle_x, cw, ch);
    cam.validate();
    return cam;
}

CameraSet load_cameras(const std::filesystem::path &path) {
    const std::string where = path.string();
    const json doc          = read_json(path);
    CameraSet set;
    try {
        if (!doc.is_object() || !doc.contains("camera_angle_x") || !doc.contains("frames")) {
            throw ValidationError(where + ": expected camera_angle_x and frames");
        }
        set.camera_angle_x = doc.at("camera_angle_x").get<double>();
        if (!(set.camera_angle_x > 0.0 && set.camera_angle_x < 3.141592653589793)) {
            throw ValidationError(where + ": camera_angle_x must lie in (0, pi)");
        }
        if (doc.contains("w")) set.width = doc.at("w").get<int>();
        if (doc.contains("h")) set.height = doc.at("h").get<int>();
        const json &frames = doc.at("frames");
        if (!frames.is_array()) throw ValidationError(where + ": frames must be an array");
        for (std::size_t i = 0; i < frames.size(); ++i) {
            const std::string fw = where + " frame " + std::to_string(i);
            CameraFrame f;
            f.file_path       = frames[i].at("file_path").get<std::string>();
            f.camera_to_world = parse_matrix(frames[i].at("transform_matrix"), fw);
            check_rigid(f.camera_to_world, fw);
            set.frames.push_back(std::move(f));
        }
    } catch (const json::exception &e) {
        throw ValidationError(where + ": " + e.what());
    }
    return set;
}

void save_cameras(const std::filesystem::path &path, const CameraSet &set) {
    json doc;
    doc["camera_angle_x"] = set.camera_angle_x;
    if (set.width) doc["w"] = *set.width;
    if (set.height) doc["h"] = *set.height;
    json frames = json::array();
    for (const auto &f : set.frames) {
        json m = json::array();
        for (int r = 0; r < 4; ++r) {
            json row = json::array();
            for (int c = 0; c < 4; ++c) row.push_back(f.camera_to_world(r, c));
            m.push_back(row);
        }
        frames.push_back({{"file_path", f.file_path}, {"transform_matrix", m}});
    }
    doc["frames"] = frames;
    write_file_atomic(path, doc.dump(2) + "\n");
}

namespace {

std::filesystem::path resolve_image(const std::filesystem::path &dir, const std::string &file) {
    std::filesystem::path p = dir / file;
    if (std::filesystem::exists(p)) return p;
    std::filesystem::path with_ext = p;
    with_ext += ".png";
    if (std::filesystem::exists(with_ext)) return with_ext;
    throw IoError("image not found: " + p.string());
}

TrainingData load_split(const std::filesystem::path &dir, const std::string &split,
                        const Vec3 &background) {
    const CameraSet set = load_cameras(dir / ("transforms_" + split + ".json"));
    TrainingData data;
    for (std::size_t i = 0; i < set.frames.size(); ++i) {
        Image img = read_image(resolve_image(dir, set.frames[i].file_path), background);
        if ((set.width && *set.width != img.width) || (set.height && *set.height != img.height)) {
            throw ValidationError(dir.string() + ": image of " + split + " frame " +
                                  std::to_string(i) + " does not match the declared size");
        }
        data.cameras.push_back(set.camera(i, img.width, img.height));
        data.images.push_back(std::move(img));
    }
    return data;
}

} // namespace

Dataset load_dataset(const std::filesystem::path &dir) {
    Dataset ds;
    const std::filesystem::path meta = dir / "scene_meta.json";
    if (std::filesystem::exists(meta)) {
        const json m = read_json(meta);
        try {
            if (m.contains("background")) {
                const auto b  = m.at("background").get<std::vector<double>>();
                if (b.size() != 3) throw ValidationError(meta.string() + ": background needs 3 values");
                ds.background = Vec3(b[0], b[1], b[2]);
            }
            if (m.contains("bbox")) {
                const auto b = m.at("bbox").get<std::vector<double>>();
                if (b.size() != 6) throw ValidationError(meta.string() + ": bbox needs 6 values");
                Bbox box;
                box.min = Vec3(b[0], b[1], b[2]);
                box.max = Vec3(b[3], b[4], b[5]);
                ds.bbox = box;
            }
        } catch (const json::exception &e) {
            throw ValidationError(meta.string() + ": " + e.what());
        }
    }
    ds.train = load_split(dir, "train", ds.background);
    if (std::filesystem::exists(dir / "transforms_test.json")) {
        ds.test = load_split(dir, "test", ds.background);
    }
    if (ds.train.cameras.empty()) throw ValidationError(dir.string() + ": no training frames");
    return ds;
}

} // namespace sixdgs
