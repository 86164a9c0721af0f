#include "mvr/view_bundle.hpp"

#include <bit>
#include <cstring>

#include "json.hpp"

#include "mvr/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian and assume a little-endian host");

namespace mvr {

using nlohmann::json;

void RenderSettings::validate() const {
    if (render_resolution < 1 || input_resolution < 1) {
        throw ConfigError("render: resolutions must be >= 1");
    }
    if (render_resolution % input_resolution != 0) {
        throw ConfigError("render: render resolution must be an integer multiple of the input "
                          "resolution");
    }
    if (n_views < 1) throw ConfigError("render: n_views must be >= 1");
    if (!(camera_distance > 1.0)) {
        throw ConfigError("render: camera distance must exceed the normalized object radius 1");
    }
    if (!(focal_base > 0.0)) throw ConfigError("render: focal base must be > 0");
}

uint64_t view_content_hash(const PointCloud& cloud, const RenderSettings& settings) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, std::size_t n) { h = fnv1a64(p, n, h); };
    for (const Vec3& p : cloud.points) {
        const double xyz[3] = {p.x(), p.y(), p.z()};
        mix(xyz, sizeof xyz);
    }
    if (!cloud.labels.empty()) mix(cloud.labels.data(), cloud.labels.size());
    const double scalars[2] = {settings.camera_distance, settings.focal_base};
    const int32_t shape[3] = {settings.render_resolution, settings.input_resolution,
                              settings.n_views};
    mix(scalars, sizeof scalars);
    mix(shape, sizeof shape);
    return h;
}

ViewBundle build_view_bundle(const PointCloud& cloud, const RenderSettings& settings) {
    settings.validate();
    cloud.validate();
    const NormalizeResult norm = normalize(cloud);

    ViewBundle bundle;
    bundle.meta.settings = settings;
    bundle.meta.intrinsics = default_intrinsics(settings.render_resolution, settings.focal_base);
    bundle.meta.poses = generate_view_poses(settings.n_views, settings.camera_distance);
    bundle.meta.center = norm.center;
    bundle.meta.scale = norm.scale;
    bundle.meta.content_hash = view_content_hash(cloud, settings);

    const auto n = static_cast<std::size_t>(settings.n_views);
    bundle.images.resize(n);
    bundle.depths.resize(n);
    bundle.correspondences.resize(n);
    parallel_for(n, [&](std::size_t k) {
        const ViewRender render = render_view(norm.cloud, bundle.meta.poses[k],
                                              bundle.meta.intrinsics, static_cast<int>(k));
        bundle.images[k] = quantize_intensity(
            downsample(render.image, settings.input_resolution, settings.input_resolution));
        bundle.depths[k] = render.depth.cast<float>();
        bundle.correspondences[k] = correspondences_from(render);
    });
    return bundle;
}

namespace {

std::string view_stem(std::size_t k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "view_%02zu", k);
    return buf;
}

json pose_to_json(const Pose& pose) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) rot.push_back(pose.rotation(r, c));
    }
    return json{{"rotation", rot},
                {"translation", {pose.translation.x(), pose.translation.y(),
                                 pose.translation.z()}}};
}

Pose pose_from_json(const json& j) {
    Pose pose;
    const auto& rot = j.at("rotation");
    const auto& t = j.at("translation");
    if (rot.size() != 9 || t.size() != 3) throw ParseError("meta: malformed pose");
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) pose.rotation(r, c) = rot.at(3 * r + c).get<double>();
    }
    for (int i = 0; i < 3; ++i) pose.translation[i] = t.at(i).get<double>();
    pose.validate();
    return pose;
}

template <class T>
void put_pod(std::string& out, T value) {
    out.append(reinterpret_cast<const char*>(&value), sizeof value);
}

template <class T>
T take_pod(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw ParseError("correspondence.bin: truncated");
    T value;
    std::memcpy(&value, in.data() + pos, sizeof value);
    pos += sizeof value;
    return value;
}

}  // namespace

void write_view_bundle(const ViewBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto n = bundle.images.size();
    if (bundle.depths.size() != n || bundle.correspondences.size() != n ||
        bundle.meta.poses.size() != n) {
        throw LogicError("view bundle: inconsistent view counts");
    }

    std::string corr;
    for (std::size_t k = 0; k < n; ++k) {
        write_png_gray(dir / (view_stem(k) + ".png"), bundle.images[k]);
        const MatXf& depth = bundle.depths[k];
        atomic_write_file(dir / (view_stem(k) + ".depth.f32"), depth.data(),
                          static_cast<std::size_t>(depth.size()) * sizeof(float));
        put_pod<uint32_t>(corr, static_cast<uint32_t>(bundle.correspondences[k].entries.size()));
        for (const Correspondence& e : bundle.correspondences[k].entries) {
            put_pod<uint32_t>(corr, e.point_index);
            put_pod<uint16_t>(corr, e.u);
            put_pod<uint16_t>(corr, e.v);
        }
    }
    atomic_write_file(dir / "correspondence.bin", corr);

    const RenderSettings& s = bundle.meta.settings;
    json meta{
        {"format", "mvr-view-bundle-v1"},
        {"settings",
         {{"render_resolution", s.render_resolution},
          {"input_resolution", s.input_resolution},
          {"n_views", s.n_views},
          {"camera_distance", s.camera_distance},
          {"focal_base", s.focal_base}}},
        {"intrinsics",
         {{"fx", bundle.meta.intrinsics.fx},
          {"fy", bundle.meta.intrinsics.fy},
          {"cx", bundle.meta.intrinsics.cx},
          {"cy", bundle.meta.intrinsics.cy},
          {"width", bundle.meta.intrinsics.width},
          {"height", bundle.meta.intrinsics.height}}},
        {"center", {bundle.meta.center.x(), bundle.meta.center.y(), bundle.meta.center.z()}},
        {"scale", bundle.meta.scale},
        {"content_hash", to_hex(bundle.meta.content_hash)},
    };
    json poses = json::array();
    for (const Pose& p : bundle.meta.poses) poses.push_back(pose_to_json(p));
    meta["poses"] = std::move(poses);
    // meta.json is written last: its presence marks the bundle complete.
    atomic_write_file(dir / "meta.json", meta.dump(2) + "\n");
}

namespace {

ViewBundleMeta read_meta(const std::filesystem::path& dir) {
    json meta;
    try {
        meta = json::parse(read_file(dir / "meta.json"));
    } catch (const json::exception& e) {
        throw ParseError("meta.json: " + std::string(e.what()));
    }
    ViewBundleMeta out;
    try {
        if (meta.at("format").get<std::string>() != "mvr-view-bundle-v1") {
            throw ParseError("meta.json: unknown bundle format");
        }
        const json& s = meta.at("settings");
        out.settings.render_resolution = s.at("render_resolution").get<int>();
        out.settings.input_resolution = s.at("input_resolution").get<int>();
        out.settings.n_views = s.at("n_views").get<int>();
        out.settings.camera_distance = s.at("camera_distance").get<double>();
        out.settings.focal_base = s.at("focal_base").get<double>();
        const json& k = meta.at("intrinsics");
        out.intrinsics.fx = k.at("fx").get<double>();
        out.intrinsics.fy = k.at("fy").get<double>();
        out.intrinsics.cx = k.at("cx").get<double>();
        out.intrinsics.cy = k.at("cy").get<double>();
        out.intrinsics.width = k.at("width").get<int>();
        out.intrinsics.height = k.at("height").get<int>();
        for (const json& p : meta.at("poses")) out.poses.push_back(pose_from_json(p));
        const json& c = meta.at("center");
        out.center = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
        out.scale = meta.at("scale").get<double>();
        out.content_hash = std::stoull(meta.at("content_hash").get<std::string>(), nullptr, 16);
    } catch (const json::exception& e) {
        throw ParseError("meta.json: " + std::string(e.what()));
    }
    out.settings.validate();
    out.intrinsics.validate();
    if (out.poses.size() != static_cast<std::size_t>(out.settings.n_views)) {
        throw ParseError("meta.json: pose count does not match n_views");
    }
    return out;
}

}  // namespace

ViewBundle read_view_bundle(const std::filesystem::path& dir) {
    ViewBundle bundle;
    bundle.meta = read_meta(dir);
    const auto n = static_cast<std::size_t>(bundle.meta.settings.n_views);
    const int res = bundle.meta.settings.render_resolution;
    const int input = bundle.meta.settings.input_resolution;

    for (std::size_t k = 0; k < n; ++k) {
        ByteGrid image = read_png_gray(dir / (view_stem(k) + ".png"));
        if (image.rows() != input || image.cols() != input) {
            throw DataError("view bundle: " + view_stem(k) + ".png has wrong resolution");
        }
        bundle.images.push_back(std::move(image));

        const std::string raw = read_file(dir / (view_stem(k) + ".depth.f32"));
        const std::size_t expected = static_cast<std::size_t>(res) * res * sizeof(float);
        if (raw.size() != expected) {
            throw DataError("view bundle: " + view_stem(k) + ".depth.f32 has wrong size");
        }
        MatXf depth(res, res);
        std::memcpy(depth.data(), raw.data(), expected);
        bundle.depths.push_back(std::move(depth));
    }

    const std::string corr = read_file(dir / "correspondence.bin");
    std::size_t pos = 0;
    for (std::size_t k = 0; k < n; ++k) {
        CorrespondenceSet set;
        const auto count = take_pod<uint32_t>(corr, pos);
        set.entries.reserve(count);
        for (uint32_t i = 0; i < count; ++i) {
            Correspondence e;
            e.point_index = take_pod<uint32_t>(corr, pos);
            e.u = take_pod<uint16_t>(corr, pos);
            e.v = take_pod<uint16_t>(corr, pos);
            if (e.u >= res || e.v >= res) {
                throw DataError("correspondence.bin: pixel out of bounds in view " +
                                std::to_string(k));
            }
            set.entries.push_back(e);
        }
        bundle.correspondences.push_back(std::move(set));
    }
    if (pos != corr.size()) throw ParseError("correspondence.bin: trailing bytes");
    return bundle;
}

bool bundle_is_current(const std::filesystem::path& dir, uint64_t content_hash) {
    if (!std::filesystem::exists(dir / "meta.json")) return false;
    try {
        const ViewBundleMeta meta = read_meta(dir);
        if (meta.content_hash != content_hash) return false;
        for (int k = 0; k < meta.settings.n_views; ++k) {
            const auto stem = view_stem(static_cast<std::size_t>(k));
            if (!std::filesystem::exists(dir / (stem + ".png")) ||
                !std::filesystem::exists(dir / (stem + ".depth.f32"))) {
                return false;
            }
        }
        return std::filesystem::exists(dir / "correspondence.bin");
    } catch (const Error&) {
        return false;
    }
}

}  // namespace mvr
