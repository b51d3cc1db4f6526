#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include "cxsim/png_io.hpp"
#include "cxsim/rng.hpp"
#include "cxsim/tensor.hpp"

// Writes the procedural 128x128 test card used by the denoising experiment:
// smooth color gradients, oriented mid-frequency texture, two rings for hard
// edges, and a faint seeded grain so patches are locally distinct.
int main(int argc, char** argv) {
    const std::string out = argc > 1 ? argv[1] : "data/test_image_128.png";
    const std::size_t size = 128;
    cxsim::Rng rng(20260815);
    std::vector<double> data(size * size * 3);

    for (std::size_t r = 0; r < size; ++r) {
        for (std::size_t c = 0; c < size; ++c) {
            const double fr = static_cast<double>(r) / (size - 1);
            const double fc = static_cast<double>(c) / (size - 1);
            const double swirl = 0.10 * std::sin(6.28318530717958648 * (1.8 * fr + 1.1 * fc));
            const double weave = 0.07 * std::sin(6.28318530717958648 * 8.0 * fr + 1.7) *
                                 std::cos(6.28318530717958648 * 6.5 * fc);
            const double d1 = std::hypot(static_cast<double>(r) - 44.0, static_cast<double>(c) - 52.0);
            const double d2 = std::hypot(static_cast<double>(r) - 86.0, static_cast<double>(c) - 80.0);
            const double ring1 = 0.12 * std::exp(-0.5 * std::pow((d1 - 22.0) / 3.0, 2.0));
            const double ring2 = 0.10 * std::exp(-0.5 * std::pow((d2 - 16.0) / 2.5, 2.0));

            double red = 0.52 + 0.22 * std::sin(6.28318530717958648 * (0.9 * fc + 0.15)) + swirl +
                         weave + ring1 - 0.5 * ring2;
            double green = 0.48 + 0.20 * std::sin(6.28318530717958648 * (1.1 * fr + 0.40)) + swirl -
                           0.6 * weave + 0.5 * ring1 + ring2;
            double blue = 0.45 + 0.18 * std::cos(6.28318530717958648 * (0.7 * fr + 0.8 * fc)) -
                          swirl + weave - ring1 + 0.7 * ring2;

            const std::size_t base = (r * size + c) * 3;
            data[base + 0] = red + 0.025 * rng.normal();
            data[base + 1] = green + 0.025 * rng.normal();
            data[base + 2] = blue + 0.025 * rng.normal();
        }
    }

    cxsim::save_png(cxsim::ImageGrid(size, size, 3, std::move(data)), out);
    std::cout << "wrote " << out << "\n";
    return 0;
}
