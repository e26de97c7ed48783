// Writes a small synthetic video dataset (features, clean labels, one-hot
// predictions, manifest.json) for trying the tfal pipeline end to end.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "prototype_dataset.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a prototype-feature video dataset"};
  tfal::synth::PrototypeSpec spec;
  std::string out = "prototype_data";
  app.add_option("--out", out, "Output directory");
  app.add_option("--videos", spec.videos, "Number of videos");
  app.add_option("--frames", spec.frames, "Frames per video");
  app.add_option("--height", spec.height, "Label height");
  app.add_option("--width", spec.width, "Label width");
  app.add_option("--classes", spec.classes, "Classes including background (1-4)")->check(CLI::Range(1, 4));
  app.add_option("--channels", spec.channels, "Feature channels (>= classes)");
  app.add_option("--sigma", spec.sigma, "Feature perturbation");
  app.add_option("--seed", spec.seed, "Seed");
  CLI11_PARSE(app, argc, argv);
  if (spec.channels < spec.classes) {
    std::cerr << "--channels must be at least " << spec.classes << "\n";
    return 1;
  }
  const auto m = tfal::synth::write_prototype_dataset(out, spec);
  std::cout << "wrote " << m.frame_count() << " frames to " << out << "/manifest.json\n";
  return 0;
}
