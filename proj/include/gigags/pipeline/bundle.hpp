#pragma once

#include "gigags/scene/camera.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gigags {

struct SceneBundle {
    std::vector<View> views;
    std::vector<std::string> image_names; // one per view, relative to the bundle's image directory
    std::vector<Vec3> points;
    std::vector<Vec3> point_colors; // empty or one per point, in [0,1]
    int up_axis = 1;
    Mat3 alignment = Mat3::Identity(); // rotation applied since ingest (source frame -> this frame)
    std::vector<int> test_ids; // View::id values held out from training

    /// Throws InvalidArgument (shape/consistency) or DimensionMismatch (image size).
    void validate() const;
    bool is_test(int view_id) const;
    std::vector<View> train_views() const;
    std::vector<View> test_views() const;
};

// Text form (images referenced by name, pixels stored separately):
//   gigags-bundle 1
//   up_axis <a>
//   alignment <R row-major 9>
//   views <n>
//   view <id> <embedding> <w> <h> <fx> <fy> <cx> <cy> <R row-major 9> <center 3> <image name>
//   points <m> <has_colors>
//   <x> <y> <z> [<r> <g> <b>]
//   test <k> <ids...>
std::string bundle_to_string(const SceneBundle &bundle);
/// Views come back without pixels. Throws MalformedLine with the line number.
SceneBundle bundle_from_string(const std::string &text);

/// bundle.txt plus images/<name> (PPM). Throws IoError.
void write_bundle(const SceneBundle &bundle, const std::filesystem::path &dir);
/// Reads bundle.txt and loads every image. Throws IoError, MalformedLine, DimensionMismatch.
SceneBundle read_bundle(const std::filesystem::path &dir);

} // namespace gigags
