// Generated by oracles/growth_reference.py; do not edit.
pub(crate) const SIXTEEN_STEP_REFERENCE: [[f64; 3]; 17] = [
    [0.0, 0.0, 0.0],
    [-0.1620906917604419, -0.3, 1.0475587045576311],
    [-0.24796454008487367, -1.0354999999999999, 2.1365957924348473],
    [-0.06260279392650137, -2.3260349999999996, 3.510008004257268],
    [0.3744605623384662, -4.342730499999999, 5.522484628218793],
    [0.8575442698439562, -7.316434649999999, 8.426381521767716],
    [1.1975020036059834, -11.547250044999998, 12.285272132840996],
    [1.4132763811936273, -17.425310058499996, 17.104733947620623],
    [1.7374330822001485, -25.457788076049994, 23.073226832847123],
    [2.432175872074029, -36.30400949886499, 30.708632038069045],
    [3.5870629576330098, -50.82109734852449, 40.79786513812435],
    [5.087088459463269, -70.12331155308183, 54.21386523016147],
    [6.783965424222858, -95.65919001900639, 71.81563722520985],
    [8.717671443975266, -129.3118320247083, 94.57189070772476],
    [11.190468104191046, -173.5292666321208, 123.85783802828567],
    [14.633010136329206, -231.49393162175704, 161.73448319296773],
    [19.39561262220583, -307.3429961082842, 211.0604929020539],
];
