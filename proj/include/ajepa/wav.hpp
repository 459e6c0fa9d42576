#pragma once

#include <string>

#include "ajepa/dsp.hpp"

namespace ajepa {

// Reads a RIFF/WAVE file. Supported encodings: PCM 16/24/32-bit and IEEE
// 32-bit float. Multichannel files contribute their first channel only.
// Samples are clamped to [-1, 1].
AudioClip read_wav(const std::string& path);

// Writes a mono 16-bit PCM WAV file. Samples are clamped to [-1, 1] first.
void write_wav(const std::string& path, const AudioClip& clip);

}  // namespace ajepa
