fn main() {
    for n in [1000usize, 2000, 4000, 8000, 16000] {
        let v = indexheat::sphere_radial_spectrum(1, n, 3);
        println!("N={n}: {:?}", v);
    }
    for n in [2000usize, 8000] {
        let v = indexheat::sphere_radial_spectrum(3, n, 3);
        println!("kappa=3/2 N={n}: {:?}", v);
    }
}
