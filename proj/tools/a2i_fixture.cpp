// Synthesizes a toy audio/frame source tree (band-limited tones + solid-color
// frames) for trying out the pipeline end to end. Test harness companion, not
// part of the main CLI surface.

#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "a2i/toyworld.hpp"

int main(int argc, char** argv) {
    CLI::App app{"write a synthetic audio/frame dataset"};

    std::string root;
    std::string classes = "chime,drone,hum,whistle";
    a2i::ToyDatasetSpec spec;
    std::string inconsistent;

    app.add_option("--root", root, "output directory")->required();
    app.add_option("--classes", classes, "comma-separated class labels");
    app.add_option("--clips-per-class", spec.clips_per_class, "clips per class");
    app.add_option("--duration", spec.duration_s, "clip length in seconds");
    app.add_option("--sample-rate", spec.sample_rate, "sample rate in Hz");
    app.add_option("--image-size", spec.image_size, "frame edge length in pixels");
    app.add_option("--frames-per-clip", spec.frames_per_clip, "candidate frames per clip");
    app.add_option("--seed", spec.seed, "seed");
    app.add_option("--inconsistent", inconsistent,
                   "comma-separated clip ids designed to fail the consistency filter");

    CLI11_PARSE(app, argc, argv);

    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(item);
        return out;
    };

    try {
        spec.classes          = split(classes);
        spec.inconsistent_ids = split(inconsistent);
        a2i::write_toy_dataset(root, spec);
        std::cout << "wrote " << spec.classes.size() * spec.clips_per_class << " clips under "
                  << root << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
