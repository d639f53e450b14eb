# Regenerates the image and feature fixtures. The golden h_lighter image
# comes from Python's colorsys, independently of the Rust kernels.
import colorsys, math, random
# input pattern: 24x16, varied hues, greys and saturated blocks
w,h=24,16
px=[]
for y in range(h):
    for x in range(w):
        if x < 4:
            v = (y*16) % 256; px.append((v,v,v))
        else:
            r=(x*37+y*11)%256; g=(x*13+y*29+80)%256; b=(x*7+y*53+160)%256
            px.append((r,g,b))
def ppm(p, w, h, path):
    with open(path,'wb') as f:
        f.write(b'P6\n%d %d\n255\n'%(w,h))
        f.write(bytes([c for t in p for c in t]))
ppm(px,w,h,'pattern_24x16.ppm')
def q(v):
    r = math.floor(abs(v)+0.5)*(1 if v>=0 else -1)
    return max(0,min(255,int(r)))
a=0.3
out=[]
for (r,g,b) in px:
    hh,s,v=colorsys.rgb_to_hsv(r/255,g/255,b/255)
    H=hh*180
    H2=a*180+(1-a)*H
    rr,gg,bb=colorsys.hsv_to_rgb((H2/180)%1.0,s,v)
    out.append((q(rr*255),q(gg*255),q(bb*255)))
ppm(out,w,h,'h_lighter_0.3_golden.ppm')
random.seed(5)
def feats(n,d,shift,path):
    with open(path,'w') as f:
        f.write('id,'+','.join('f%d'%i for i in range(d))+'\n')
        for i in range(n):
            f.write('img%d,'%i+','.join('%.6f'%(random.gauss(shift,1.0)) for _ in range(d))+'\n')
feats(8,5,0.0,'features_a.csv')
feats(7,5,0.4,'features_b.csv')
