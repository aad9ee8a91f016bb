#pragma once

#include <array>
#include <string>
#include <vector>

#include "pgs/core/image.hpp"
#include "pgs/core/math.hpp"

namespace pgs {

// Pinhole camera with a rigid world-to-camera transform (row-major 4x4).
struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    std::array<double, 16> world_to_cam{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

    Mat3<double> rotation() const {
        Mat3<double> r;
        r << world_to_cam[0], world_to_cam[1], world_to_cam[2], world_to_cam[4], world_to_cam[5],
            world_to_cam[6], world_to_cam[8], world_to_cam[9], world_to_cam[10];
        return r;
    }
    Vec3<double> translation() const {
        return Vec3<double>(world_to_cam[3], world_to_cam[7], world_to_cam[11]);
    }
    Vec3<double> center() const { return -rotation().transpose() * translation(); }

    Vec3<double> to_camera(const Vec3<double>& p_world) const {
        return rotation() * p_world + translation();
    }

    std::vector<std::string> validate() const {
        std::vector<std::string> out;
        if (!(fx > 0) || !(fy > 0)) out.push_back("focal lengths must be positive");
        if (width < 1 || height < 1) out.push_back("image size must be at least 1x1");
        const Mat3<double> r = rotation();
        if ((r * r.transpose() - Mat3<double>::Identity()).cwiseAbs().maxCoeff() > 1e-6)
            out.push_back("rotation block is not orthonormal");
        return out;
    }
};

// A posed ground-truth image plus its precomputed binary sensitivity map.
template <class T>
struct View {
    Camera camera;
    Image<T> gt_image;         // HxWx3 in [0,1]
    Image<T> sens_map;         // HxW, values in {0,1}
    T avg_sensitivity = T(0);  // mean of sens_map

    static T mean_of(const Image<T>& map) {
        T sum = T(0);
        for (const T v : map.data) sum += v;
        return map.data.empty() ? T(0) : sum / T(map.data.size());
    }
};

}  // namespace pgs
