/**
 * Copyright 2026 The spurbench Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

namespace spurbench {

// Bundled pairing tables. Grammar: one "foreground -> bg, bg, bg, bg" row
// per line; '#' starts a comment; blank lines ignored.

inline constexpr const char* kStandardPairingText = R"(# standard pairing (38 foregrounds x 4 backgrounds)
dog bark -> church bells, hen, rain, chirping birds
rooster -> hen, church bells, chirping birds, engine idling
pig -> church bells, engine idling, rain, siren
cow -> crickets, engine idling, rain, car horn
crow -> airplane, footsteps, thunderstorm, rain
brushing teeth -> toilet flush, water drops, drinking, thunderstorm
sneezing -> pouring water, vacuum cleaner, footsteps, thunderstorm
clapping -> fireworks, church bells, car horn, airplane
snoring -> clock alarm, clock tick, door knock, vacuum cleaner
cough -> wind, vacuum cleaner, thunderstorm, water drops
frog -> crickets, insects, thunderstorm, water drops
cat -> crying baby, rain, hen, vacuum cleaner
sea waves -> siren, car horn, airplane, thunderstorm
crackling fire -> wind, door knock, rain, thunderstorm
breathing -> hand saw, rain, thunderstorm, chirping birds
mouse click -> keyboard typing, door knock, drinking, clock tick
door creaks -> footsteps, door knock, rain, wind
can opening -> drinking, glass breaking, pouring water, keyboard typing
washing machine -> toilet flush, car horn, siren, clock alarm
helicopter -> rain, thunderstorm, airplane, clock alarm
chainsaw -> footsteps, wind, crying baby, rain
gun shot -> siren, alarm bell ringing, wind, rain
drilling -> car horn, street music, siren, rain
jackhammer -> siren, rain, glass breaking, clock alarm
children playing -> street music, rain, glass breaking, water drops
air conditioner -> rain, thunderstorm, drinking, water drops
throat clearing -> door knock, toilet flush, glass breaking, water drops
door slam -> door knock, footsteps, alarm bell ringing, rain
keys drop -> drinking, keyboard typing, glass breaking, door knock
page turn -> thunderstorm, rain, pouring water, street music
phone -> door knock, crying baby, insects, hand saw
drawer -> keyboard typing, frying, door knock, footsteps
running water -> toilet flush, drinking, frying, crying baby
electric shaver -> toilet flush, drinking, pouring water, footsteps
blender -> frying, glass breaking, pouring water, alarm bell ringing
laughter -> car horn, drinking, glass breaking, keyboard typing
sigh -> crying baby, toilet flush, clock alarm, glass breaking
sniff -> street music, frying, thunderstorm, hand saw
)";

// Hard variant: overlapping rows in the test split so coverage-constrained
// episodes are satisfiable. Differs from standard in 9 rows.
inline constexpr const char* kHardPairingText = R"(# hard pairing (38 foregrounds x 4 backgrounds)
dog bark -> church bells, hen, rain, chirping birds
rooster -> hen, church bells, chirping birds, engine idling
pig -> car horn, crying baby, rain, siren
cow -> crickets, engine idling, rain, car horn
crow -> car horn, siren, street music, rain
brushing teeth -> toilet flush, water drops, drinking, thunderstorm
sneezing -> crying baby, car horn, rain, street music
clapping -> fireworks, church bells, car horn, airplane
snoring -> clock alarm, clock tick, door knock, vacuum cleaner
cough -> rain, street music, car horn, crying baby
frog -> crickets, insects, thunderstorm, water drops
cat -> crying baby, rain, hen, vacuum cleaner
sea waves -> siren, car horn, airplane, thunderstorm
crackling fire -> crying baby, car horn, rain, siren
breathing -> hand saw, rain, thunderstorm, chirping birds
mouse click -> keyboard typing, door knock, drinking, clock tick
door creaks -> footsteps, door knock, rain, wind
can opening -> drinking, glass breaking, pouring water, keyboard typing
washing machine -> toilet flush, car horn, siren, clock alarm
helicopter -> rain, thunderstorm, airplane, siren
chainsaw -> siren, car horn, crying baby, rain
gun shot -> siren, alarm bell ringing, wind, rain
drilling -> car horn, street music, siren, rain
jackhammer -> siren, rain, glass breaking, clock alarm
children playing -> street music, rain, glass breaking, water drops
air conditioner -> rain, thunderstorm, drinking, water drops
throat clearing -> door knock, toilet flush, glass breaking, water drops
door slam -> door knock, footsteps, alarm bell ringing, rain
keys drop -> drinking, keyboard typing, glass breaking, door knock
page turn -> thunderstorm, rain, pouring water, street music
phone -> street music, crying baby, car horn, rain
drawer -> keyboard typing, frying, door knock, footsteps
running water -> toilet flush, drinking, frying, crying baby
electric shaver -> toilet flush, drinking, pouring water, footsteps
blender -> street music, car horn, crying baby, rain
laughter -> car horn, drinking, glass breaking, keyboard typing
sigh -> crying baby, toilet flush, clock alarm, glass breaking
sniff -> street music, frying, thunderstorm, hand saw
)";

}  // namespace spurbench
